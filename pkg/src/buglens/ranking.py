"""Pairwise distances between fingerprints and furthest-point-first ranking.

Ties in FPF (equal largest minimum distance) go to the smallest program id.
The ranking functions sort fingerprints by id up front, so the result does
not depend on input order, only on the seed.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from buglens import kernels
from buglens.errors import DimensionMismatch
from buglens.model import LEVELS, Commit, Fingerprint, OptVector, RankedList

MODES = ("combined", "bisect-only", "random")


def distance_bisect(a: Commit, b: Commit) -> int:
    return abs(int(a.timestamp) - int(b.timestamp))


def opt_mismatches(a: OptVector, b: OptVector) -> int:
    if len(a.bits) != len(b.bits):
        raise DimensionMismatch(f"vector lengths {len(a.bits)} and {len(b.bits)}")
    return int(a.level != b.level) + sum(x != y for x, y in zip(a.bits, b.bits))


def distance_opt(a: OptVector, b: OptVector) -> float:
    return opt_mismatches(a, b) / (len(a.bits) + 1)


def distance_combined(a: Fingerprint, b: Fingerprint) -> float:
    return distance_bisect(a.commit, b.commit) + distance_opt(a.vector, b.vector)


def distance_bisect_only(a: Fingerprint, b: Fingerprint) -> int:
    return distance_bisect(a.commit, b.commit)


# --------------------------------------------------------------------------
# matrices


def _sorted(fingerprints: Iterable[Fingerprint]) -> list[Fingerprint]:
    fps = sorted(fingerprints, key=lambda f: f.program_id)
    for a, b in zip(fps, fps[1:]):
        if a.program_id == b.program_id:
            raise ValueError(f"duplicate program id {a.program_id}")
    return fps


def _level_codes(fps: Sequence[Fingerprint]) -> np.ndarray:
    extra = sorted({f.vector.level for f in fps} - set(LEVELS))
    codes = {lvl: i for i, lvl in enumerate(list(LEVELS) + extra)}
    return np.array([codes[f.vector.level] for f in fps], dtype=np.int64)


def bisect_matrix(fps: Sequence[Fingerprint]) -> np.ndarray:
    ts = np.array([f.commit.timestamp for f in fps], dtype=np.int64)
    return kernels.bisect_matrix(ts)


def combined_matrix(fps: Sequence[Fingerprint]) -> np.ndarray:
    """Combined distances scaled by ``n + 1`` so every entry is an exact integer.

    Scaling by a positive constant leaves the FPF order unchanged and avoids
    any rounding in the seconds-plus-fraction sum.
    """
    if not fps:
        return np.zeros((0, 0))
    dims = {len(f.vector.bits) for f in fps}
    if len(dims) > 1:
        raise DimensionMismatch(f"vector lengths {sorted(dims)}")
    n = dims.pop()
    bits = np.ascontiguousarray([f.vector.bits for f in fps], dtype=np.uint8).reshape(len(fps), n)
    mism = kernels.mismatch_matrix(_level_codes(fps), bits)
    return bisect_matrix(fps) * (n + 1) + mism


def pairwise_matrix(fps: Sequence[Fingerprint], distance: Callable) -> np.ndarray:
    m = np.zeros((len(fps), len(fps)))
    for i in range(len(fps)):
        for j in range(i + 1, len(fps)):
            m[i, j] = m[j, i] = distance(fps[i], fps[j])
    return m


# --------------------------------------------------------------------------
# ranking


def start_index(n: int, seed: int) -> int:
    return int(np.random.default_rng(seed).integers(n))


def fpf_order(matrix: np.ndarray, start: int) -> np.ndarray:
    return kernels.fpf_order(np.ascontiguousarray(matrix, dtype=np.float64), start)


def fpf_rank(
    fingerprints: Sequence[Fingerprint],
    distance: Optional[Callable] = None,
    seed: int = 0,
    matrix: Optional[np.ndarray] = None,
) -> RankedList:
    """Furthest-point-first ordering.

    The first program is drawn uniformly by ``seed``; each next one maximises
    its minimum distance to those already chosen. Pass either a pairwise
    ``distance`` callable or a precomputed ``matrix`` aligned with the
    fingerprints sorted by program id.
    """
    fps = _sorted(fingerprints)
    if not fps:
        raise ValueError("fpf_rank needs at least one fingerprint")
    if matrix is None:
        matrix = pairwise_matrix(fps, distance or distance_combined)
    order = fpf_order(matrix, start_index(len(fps), seed))
    return RankedList(tuple(fps[i].program_id for i in order), seed)


def rank_combined(fingerprints: Sequence[Fingerprint], seed: int = 0) -> RankedList:
    fps = _sorted(fingerprints)
    return fpf_rank(fps, seed=seed, matrix=combined_matrix(fps))


def rank_bisect_only(fingerprints: Sequence[Fingerprint], seed: int = 0) -> RankedList:
    fps = _sorted(fingerprints)
    return fpf_rank(fps, seed=seed, matrix=bisect_matrix(fps))


def rank_random(ids: Iterable[str], seed: int = 0) -> RankedList:
    ids = sorted(ids)
    perm = np.random.default_rng(seed).permutation(len(ids))
    return RankedList(tuple(ids[i] for i in perm), seed)


def rank_many(fingerprints: Sequence[Fingerprint], mode: str, seeds: Sequence[int]) -> list[RankedList]:
    """Rank once per seed, building the distance matrix only once."""
    fps = _sorted(fingerprints)
    if mode == "random":
        return [rank_random((f.program_id for f in fps), s) for s in seeds]
    if mode == "combined":
        matrix = combined_matrix(fps)
    elif mode == "bisect-only":
        matrix = bisect_matrix(fps)
    else:
        raise ValueError(f"unknown ranking mode {mode!r}")
    return [fpf_rank(fps, seed=s, matrix=matrix) for s in seeds]
