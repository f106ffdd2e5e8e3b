"""End-to-end orchestration: locate, minimise, rank, evaluate."""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from buglens import bisection
from buglens.errors import BisectError, DegenerateSample, NotReproducibleAtCommit
from buglens.evaluation import EvaluationReport, compare_report, evaluate, wilcoxon_signed_rank
from buglens.model import (
    BisectionOutcome,
    CommitHistory,
    Fingerprint,
    PassUniverse,
    RankedList,
    TestProgram,
)
from buglens.optmin import minimize_opts
from buglens.oracle import Oracle
from buglens.ranking import rank_many

log = logging.getLogger(__name__)

# report name -> ranking mode
RANKERS = {"buglens": "combined", "bisection-sole": "bisect-only", "random": "random"}
MODE_NAMES = {mode: name for name, mode in RANKERS.items()}
DEFAULT_REPETITIONS = 100


def default_parallelism() -> int:
    return os.cpu_count() or 1


def pmap(fn: Callable, items: Sequence, parallelism: int = 1) -> list:
    if parallelism <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


def derive_seeds(root: int, count: int) -> list[int]:
    """Per-repetition FPF seeds drawn from one root seed."""
    return [int(s) for s in np.random.SeedSequence(root).generate_state(count)]


@dataclass
class Located:
    outcomes: list[BisectionOutcome]
    unresolved: dict[str, str] = field(default_factory=dict)

    @property
    def unverified(self) -> list[str]:
        return [o.program_id for o in self.outcomes if not o.verified]


def locate_all(
    programs: Sequence[TestProgram],
    history: CommitHistory,
    oracle: Oracle,
    parallelism: int = 1,
    check: bool = True,
) -> Located:
    """Bisect every program; programs whose commit cannot be isolated are set aside."""

    def one(program):
        try:
            return bisection.locate(program, history, oracle, check=check)
        except BisectError as exc:
            log.warning("%s: %s", program.id, exc)
            return f"{type(exc).__name__}: {exc}"

    results = pmap(one, list(programs), parallelism)
    located = Located([])
    for program, res in zip(programs, results):
        if isinstance(res, str):
            located.unresolved[program.id] = res
        else:
            located.outcomes.append(res)
    return located


def fingerprint_all(
    outcomes: Sequence[BisectionOutcome],
    programs: Sequence[TestProgram],
    history: CommitHistory,
    universe: PassUniverse,
    oracle: Oracle,
    parallelism: int = 1,
    at: str = "inducing",
) -> tuple[list[Fingerprint], dict[str, str], list[str]]:
    """Minimise optimisation passes for each located program.

    ``at`` selects the version probed: the inducing commit or the bad bound.
    Returns fingerprints, programs that could not be minimised, and programs
    whose pass set could not be certified 1-minimal.
    """
    if at not in ("inducing", "bad"):
        raise ValueError(f"unknown minimisation point {at!r}")
    by_id = {p.id: p for p in programs}

    def one(outcome):
        commit = outcome.inducing_commit if at == "inducing" else history.get(outcome.bad_bound)
        try:
            res = minimize_opts(by_id[outcome.program_id], commit, universe, oracle)
        except NotReproducibleAtCommit as exc:
            return str(exc)
        return Fingerprint(outcome.program_id, outcome.inducing_commit, res.vector), res.certified

    fps, failed, uncertified = [], {}, []
    for outcome, res in zip(outcomes, pmap(one, list(outcomes), parallelism)):
        if isinstance(res, str):
            failed[outcome.program_id] = res
            continue
        fp, certified = res
        fps.append(fp)
        if not certified:
            uncertified.append(fp.program_id)
    return fps, failed, uncertified


def rank_all(
    fingerprints: Sequence[Fingerprint],
    seeds: Sequence[int],
    rankers: Iterable[str] = tuple(RANKERS),
) -> dict[str, list[RankedList]]:
    return {name: rank_many(fingerprints, RANKERS[name], seeds) for name in rankers}


# --------------------------------------------------------------------------
# reporting


def _wilcoxon(x, y) -> dict:
    try:
        stat, p = wilcoxon_signed_rank(x, y)
    except (DegenerateSample, ValueError) as exc:
        return {"error": str(exc)}
    return {"statistic": stat, "p_value": p}


def build_report(
    rankings: Mapping[str, Sequence[RankedList]],
    truth: Mapping[str, str],
    build_stats: Optional[tuple[int, float]] = None,
    dataset: Optional[dict] = None,
) -> tuple[dict, dict[str, EvaluationReport]]:
    reports = {name: evaluate(name, orders, truth, build_stats) for name, orders in sorted(rankings.items())}
    comparisons = {}
    if "buglens" in reports:
        ours = reports["buglens"]
        for name, other in reports.items():
            if name == "buglens":
                continue
            comparisons[f"buglens_vs_{name}"] = {
                "delta_pct": {str(k): v for k, v in compare_report(ours.wasted_effort, other.wasted_effort).items()},
                "mean_final_effort": [float(np.mean(ours.final_efforts())), float(np.mean(other.final_efforts()))],
                "wilcoxon_per_seed": _wilcoxon(ours.final_efforts(), other.final_efforts()),
                "wilcoxon_per_bug": _wilcoxon(
                    [ours.wasted_effort[k] for k in sorted(ours.wasted_effort)],
                    [other.wasted_effort[k] for k in sorted(other.wasted_effort)],
                ),
            }
    report = {
        "rankers": {name: r.to_json() for name, r in reports.items()},
        "comparisons": comparisons,
    }
    if build_stats is not None:
        report["build_stats"] = {
            "distinct_versions_built": build_stats[0],
            "versions_per_case": build_stats[1],
        }
    if dataset is not None:
        report["dataset"] = dataset
    return report, reports


def curves_csv(reports: Mapping[str, EvaluationReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["examined", "mean_bugs", "std_bugs", "ranker_name"])
    for name, r in sorted(reports.items()):
        for (i, mean), std in zip(r.discovery_curve, r.curve_std):
            w.writerow([i, repr(mean), repr(std), name])
    return buf.getvalue()
