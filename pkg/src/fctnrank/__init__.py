"""Rank selection for fully connected tensor network decompositions."""

from .fctn import AlsOptions, RankAssignment, compose, decompose, edges, param_count
from .objective import EvalResult, compression_ratio, evaluate, loss
from .search import RunLog, SearchConfig, rank_upper_bounds, run_search

__all__ = [
    "AlsOptions",
    "EvalResult",
    "RankAssignment",
    "RunLog",
    "SearchConfig",
    "compose",
    "compression_ratio",
    "decompose",
    "edges",
    "evaluate",
    "loss",
    "param_count",
    "rank_upper_bounds",
    "run_search",
]

__version__ = "0.1.0"
