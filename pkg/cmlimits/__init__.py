# cmlimits/__init__.py
"""
Configuration model limit laws.

Uniform matchings over prescribed degree sequences, the Poisson laws of their
cycle counts, the fragment law of their unicyclic components and the set of
limit probabilities first-order sentences can reach.
"""
from .cm import MatchingSampler, enumerate_matchings, make_rng, sample_cm, sample_simple
from .degseq import DegreeModel, DegreeSequence, realize
from .fragcat import FragmentCatalogue, enumerate_fragments
from .kakeya import analyze, threshold_report
from .limits import LimitLaw, q_value, solve_nu0
from .models import BudgetExceeded, CmLimitsError, ValidationError, Variant, Verdict
from .multigraph import Fragment, Multigraph, count_cycles, extract_fragment

__all__ = [
    "BudgetExceeded",
    "CmLimitsError",
    "DegreeModel",
    "DegreeSequence",
    "Fragment",
    "FragmentCatalogue",
    "LimitLaw",
    "MatchingSampler",
    "Multigraph",
    "ValidationError",
    "Variant",
    "Verdict",
    "analyze",
    "count_cycles",
    "enumerate_fragments",
    "enumerate_matchings",
    "extract_fragment",
    "make_rng",
    "q_value",
    "realize",
    "sample_cm",
    "sample_simple",
    "solve_nu0",
    "threshold_report",
]

__version__ = "0.1.0"
