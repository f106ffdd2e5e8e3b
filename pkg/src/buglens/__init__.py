"""Bisection-based deduplication of compiler bug-triggering test programs."""

from buglens.bisection import bisect, init_range, locate, verify
from buglens.evaluation import (
    compare_report,
    discovery_curve,
    wasted_effort,
    wilcoxon_signed_rank,
)
from buglens.model import (
    BisectionOutcome,
    Commit,
    CommitHistory,
    Fingerprint,
    OptConfig,
    OptVector,
    OracleQuery,
    OracleVerdict,
    PassUniverse,
    RankedList,
    TestProgram,
    Verdict,
    validate_dataset,
)
from buglens.optmin import minimize_opts
from buglens.ranking import (
    distance_bisect,
    distance_combined,
    distance_opt,
    fpf_rank,
    rank_bisect_only,
    rank_combined,
)

__version__ = "0.1.0"
