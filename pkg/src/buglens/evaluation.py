"""Scoring ranked lists against ground-truth bug labels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from buglens.errors import DegenerateSample, MissingLabel
from buglens.model import RankedList

EXACT_MAX_N = 25


def _labels(order: Sequence[str], truth: Mapping[str, str]) -> list[str]:
    out = []
    for pid in order:
        try:
            out.append(truth[pid])
        except KeyError:
            raise MissingLabel(pid) from None
    return out


def _ids(order) -> Sequence[str]:
    return order.order if isinstance(order, RankedList) else order


def discovery_curve(order, truth: Mapping[str, str]) -> list[tuple[int, int]]:
    """``(examined, distinct bugs seen)`` after each program in ``order``."""
    seen: set[str] = set()
    curve = []
    for i, label in enumerate(_labels(_ids(order), truth), start=1):
        seen.add(label)
        curve.append((i, len(seen)))
    return curve


def effort(order, truth: Mapping[str, str]) -> list[int]:
    """1-based positions at which the 1st, 2nd, ... distinct bug first appears."""
    seen: set[str] = set()
    out = []
    for i, label in enumerate(_labels(_ids(order), truth), start=1):
        if label not in seen:
            seen.add(label)
            out.append(i)
    return out


def effort_matrix(orders: Sequence, truth: Mapping[str, str]) -> np.ndarray:
    rows = [effort(o, truth) for o in orders]
    if not rows:
        raise ValueError("need at least one ranking")
    if len({len(r) for r in rows}) != 1:
        raise ValueError("rankings cover different bug sets")
    return np.array(rows, dtype=np.int64)


def wasted_effort(orders: Sequence, truth: Mapping[str, str]) -> dict[int, float]:
    """Mean (over repetitions) examinations needed to reach k distinct bugs."""
    m = effort_matrix(orders, truth)
    return {k + 1: float(v) for k, v in enumerate(m.mean(axis=0))}


def compare_report(buglens: Mapping[int, float], baseline: Mapping[int, float]) -> dict[int, float]:
    """Relative improvement (percent) of ``buglens`` over ``baseline`` per k."""
    if set(buglens) != set(baseline):
        raise ValueError("effort tables cover different bug counts")
    return {k: (baseline[k] - buglens[k]) / baseline[k] * 100.0 for k in sorted(baseline)}


# --------------------------------------------------------------------------
# Wilcoxon signed-rank


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, tied values sharing the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(len(v), dtype=np.float64)
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _signed_ranks(x, y) -> tuple[np.ndarray, np.ndarray]:
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    if d.ndim != 1:
        raise ValueError("paired samples must be one-dimensional and equally long")
    d = d[d != 0]
    if len(d) == 0:
        raise DegenerateSample("all paired differences are zero")
    return average_ranks(np.abs(d)), d > 0


def _exact_null_counts(doubled_ranks: Sequence[int]) -> list[int]:
    """Number of sign assignments giving each value of twice the positive rank sum."""
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    return counts


def wilcoxon_exact_p(x, y) -> float:
    ranks, positive = _signed_ranks(x, y)
    doubled = [int(round(2 * r)) for r in ranks]
    t = sum(r for r, p in zip(doubled, positive) if p)
    counts = _exact_null_counts(doubled)
    lower = sum(counts[: t + 1])
    upper = sum(counts[t:])
    return min(1.0, 2 * min(lower, upper) / 2 ** len(doubled))


def wilcoxon_normal_p(x, y) -> float:
    ranks, positive = _signed_ranks(x, y)
    n = len(ranks)
    t = float(ranks[positive].sum())
    mean = n * (n + 1) / 4
    _, tie_sizes = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - float(((tie_sizes**3) - tie_sizes).sum()) / 48
    if var <= 0:
        return 1.0
    z = max(abs(t - mean) - 0.5, 0.0) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2)))


def wilcoxon_signed_rank(x, y, method: str = "auto") -> tuple[float, float]:
    """Two-sided paired Wilcoxon signed-rank test.

    Zero differences are dropped and tied magnitudes get average ranks. The
    p-value is exact for at most 25 non-zero pairs and uses the normal
    approximation with continuity and tie correction above that. Returns
    ``(min(W+, W-), p)``.
    """
    ranks, positive = _signed_ranks(x, y)
    n = len(ranks)
    if n < 5:
        raise ValueError(f"need at least 5 non-zero differences, got {n}")
    w_plus = float(ranks[positive].sum())
    stat = min(w_plus, float(ranks.sum()) - w_plus)
    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "approx"
    if method == "exact":
        return stat, wilcoxon_exact_p(x, y)
    if method == "approx":
        return stat, wilcoxon_normal_p(x, y)
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# report


@dataclass
class EvaluationReport:
    ranker: str
    discovery_curve: list[tuple[int, float]]
    curve_std: list[float]
    wasted_effort: dict[int, float]
    repetitions: int
    per_rep_effort: list[list[int]]
    seeds: list[int] = field(default_factory=list)
    build_stats: Optional[tuple[int, float]] = None

    @property
    def total_bugs(self) -> int:
        return len(self.wasted_effort)

    def final_efforts(self) -> list[int]:
        return [row[-1] for row in self.per_rep_effort]

    def to_json(self) -> dict:
        out = {
            "ranker": self.ranker,
            "repetitions": self.repetitions,
            "total_bugs": self.total_bugs,
            "seeds": list(self.seeds),
            "wasted_effort": {str(k): v for k, v in self.wasted_effort.items()},
            "per_rep_effort": self.per_rep_effort,
            "discovery_curve": [[i, m, s] for (i, m), s in zip(self.discovery_curve, self.curve_std)],
        }
        if self.build_stats is not None:
            out["build_stats"] = {
                "distinct_versions_built": self.build_stats[0],
                "versions_per_case": self.build_stats[1],
            }
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "EvaluationReport":
        bs = data.get("build_stats")
        return cls(
            ranker=data["ranker"],
            discovery_curve=[(int(i), float(m)) for i, m, _ in data["discovery_curve"]],
            curve_std=[float(s) for _, _, s in data["discovery_curve"]],
            wasted_effort={int(k): float(v) for k, v in data["wasted_effort"].items()},
            repetitions=int(data["repetitions"]),
            per_rep_effort=[list(map(int, r)) for r in data["per_rep_effort"]],
            seeds=list(data.get("seeds", [])),
            build_stats=None if bs is None else (int(bs["distinct_versions_built"]), float(bs["versions_per_case"])),
        )


def evaluate(
    ranker: str,
    orders: Sequence[RankedList],
    truth: Mapping[str, str],
    build_stats: Optional[tuple[int, float]] = None,
) -> EvaluationReport:
    curves = np.array([[b for _, b in discovery_curve(o, truth)] for o in orders], dtype=np.float64)
    m = effort_matrix(orders, truth)
    return EvaluationReport(
        ranker=ranker,
        discovery_curve=[(i + 1, float(v)) for i, v in enumerate(curves.mean(axis=0))],
        curve_std=[float(v) for v in curves.std(axis=0)],
        wasted_effort={k + 1: float(v) for k, v in enumerate(m.mean(axis=0))},
        repetitions=len(orders),
        per_rep_effort=m.tolist(),
        seeds=[o.seed for o in orders],
        build_stats=build_stats,
    )
