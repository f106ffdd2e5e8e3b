"""Deterministic synthetic compiler worlds with ground truth.

A world is a linear commit history, a pass universe, a set of injected bugs
and the test programs that trigger them. :class:`SimOracle` answers oracle
queries from that ground truth, optionally with crash windows (undecidable
verdicts) and per-program shifts of the first failing commit.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from buglens.errors import InfeasibleParams, UnknownEntity
from buglens.model import (
    LEVELS,
    CommitHistory,
    OracleQuery,
    OracleVerdict,
    PassUniverse,
    TestProgram,
    Verdict,
    load_history,
    load_programs,
    load_universe,
    read_json,
    write_json_atomic,
)
from buglens.oracle import BuildCache, Oracle

BASE_TIMESTAMP = 1_170_000_000


@dataclass(frozen=True)
class BugSpec:
    label: str
    inducing_ordinal: int
    level: str
    trigger_passes: frozenset[str] = frozenset()
    fixed_ordinal: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "inducing_ordinal": self.inducing_ordinal,
            "level": self.level,
            "trigger_passes": sorted(self.trigger_passes),
            "fixed_ordinal": self.fixed_ordinal,
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "BugSpec":
        return cls(
            d["label"],
            int(d["inducing_ordinal"]),
            d["level"],
            frozenset(d.get("trigger_passes", ())),
            d.get("fixed_ordinal"),
        )


@dataclass(frozen=True)
class NoiseSpec:
    crash_windows: Mapping[str, tuple[int, int]] = field(default_factory=dict)
    manifestation_shift: Mapping[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "crash_windows": {k: list(v) for k, v in sorted(self.crash_windows.items())},
            "manifestation_shift": dict(sorted(self.manifestation_shift.items())),
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "NoiseSpec":
        return cls(
            {k: (int(a), int(b)) for k, (a, b) in d.get("crash_windows", {}).items()},
            {k: int(v) for k, v in d.get("manifestation_shift", {}).items()},
        )


@dataclass(frozen=True)
class WorldParams:
    commits: int = 200
    bugs: int = 4
    programs: Optional[int] = None  # defaults to 3 per bug
    zipf_exponent: float = 1.2
    passes: int = 24
    bug_levels: tuple[str, ...] = ("O1", "O2", "O3", "Os")
    min_trigger: int = 1
    max_trigger: int = 3
    implicit_rate: float = 0.1
    multi_bug_commit_rate: float = 0.0
    fixed_rate: float = 0.0
    crash_rate: float = 0.0
    crash_window_max: int = 3
    shift_rate: float = 0.0
    shift_max: int = 50
    seed: int = 0

    @classmethod
    def from_json(cls, d: Mapping) -> "WorldParams":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InfeasibleParams(f"unknown world parameters: {sorted(unknown)}")
        d = dict(d)
        if "bug_levels" in d:
            d["bug_levels"] = tuple(d["bug_levels"])
        return cls(**d)

    def to_json(self) -> dict:
        d = asdict(self)
        d["bug_levels"] = list(self.bug_levels)
        return d


# Shapes of the four evaluation datasets (programs, bugs).
PRESETS: dict[str, WorldParams] = {
    "gcc430-shape": WorldParams(
        commits=3000, bugs=29, programs=1235, zipf_exponent=1.3, passes=60,
        multi_bug_commit_rate=0.35, crash_rate=0.03, crash_window_max=4,
        shift_rate=0.04, shift_max=300,
    ),
    "gcc440-shape": WorldParams(
        commits=2500, bugs=11, programs=647, zipf_exponent=1.3, passes=60,
        multi_bug_commit_rate=0.3, crash_rate=0.03, shift_rate=0.03, shift_max=300,
    ),
    "gcc450-shape": WorldParams(
        commits=2000, bugs=7, programs=26, zipf_exponent=1.0, passes=60,
        multi_bug_commit_rate=0.3, crash_rate=0.03, shift_rate=0.05, shift_max=300,
    ),
    "llvm280-shape": WorldParams(
        commits=2000, bugs=5, programs=80, zipf_exponent=1.0, passes=50,
        multi_bug_commit_rate=0.3, crash_rate=0.03, shift_rate=0.05, shift_max=300,
    ),
}


def preset(name: str, seed: int = 0) -> WorldParams:
    try:
        return replace(PRESETS[name], seed=seed)
    except KeyError:
        raise InfeasibleParams(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class World:
    history: CommitHistory
    universe: PassUniverse
    programs: tuple[TestProgram, ...]
    bugs: tuple[BugSpec, ...]
    noise: NoiseSpec = NoiseSpec()
    params: Optional[WorldParams] = None

    def truth(self) -> dict[str, str]:
        return {p.id: p.ground_truth_bug for p in self.programs}

    def bug_of(self, program_id: str) -> BugSpec:
        label = self.truth()[program_id]
        return next(b for b in self.bugs if b.label == label)

    def effective_ordinal(self, program_id: str) -> int:
        shift = self.noise.manifestation_shift.get(program_id)
        return shift if shift is not None else self.bug_of(program_id).inducing_ordinal

    def truth_json(self) -> dict:
        return {
            "bugs": [b.to_json() for b in self.bugs],
            "noise": self.noise.to_json(),
            "params": self.params.to_json() if self.params else None,
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        write_json_atomic(out / "history.json", self.history.to_json())
        write_json_atomic(out / "programs.json", [p.to_json() for p in self.programs])
        write_json_atomic(out / "passes.json", self.universe.to_json())
        write_json_atomic(out / "truth.json", self.truth_json())

    @classmethod
    def read(cls, world_dir, truth_path=None) -> "World":
        d = Path(world_dir)
        truth = read_json(truth_path or d / "truth.json")
        return cls(
            load_history(d / "history.json"),
            load_universe(d / "passes.json"),
            tuple(load_programs(d / "programs.json")),
            tuple(BugSpec.from_json(b) for b in truth["bugs"]),
            NoiseSpec.from_json(truth.get("noise", {})),
            WorldParams.from_json(truth["params"]) if truth.get("params") else None,
        )


# --------------------------------------------------------------------------
# generation


def _commit_id(seed: int, i: int) -> str:
    return hashlib.sha1(f"buglens-sim:{seed}:{i}".encode()).hexdigest()


def _level_sets(names: list[str], rng: np.random.Generator) -> dict[str, frozenset[str]]:
    order = [names[i] for i in rng.permutation(len(names))]
    n = len(order)
    o1 = order[: max(1, round(0.4 * n))]
    o2 = order[: max(1, round(0.7 * n))]
    extra = [p for p in o2 if p not in o1]
    drop = set(extra[: len(extra) // 5])
    return {
        "O0": frozenset(),
        "O1": frozenset(o1),
        "O2": frozenset(o2),
        "O3": frozenset(order),
        "Os": frozenset(p for p in o2 if p not in drop),
    }


def _allocate(total: int, weights: np.ndarray) -> list[int]:
    """At least one per slot, the rest split by largest remainder."""
    k = len(weights)
    rest = total - k
    share = weights / weights.sum() * rest
    counts = np.floor(share).astype(int)
    leftover = rest - counts.sum()
    for i in np.argsort(-(share - counts), kind="stable")[:leftover]:
        counts[i] += 1
    return [int(c) + 1 for c in counts]


def generate_world(params: WorldParams) -> World:
    p = params
    n_programs = p.programs if p.programs is not None else 3 * p.bugs
    if p.commits < 2:
        raise InfeasibleParams("need at least 2 commits")
    if p.bugs < 1:
        raise InfeasibleParams("need at least 1 bug")
    if n_programs < p.bugs:
        raise InfeasibleParams("fewer programs than bugs")
    if not p.bug_levels or set(p.bug_levels) - set(LEVELS):
        raise InfeasibleParams(f"bug levels must be drawn from {LEVELS}")
    if p.min_trigger > p.max_trigger or p.min_trigger < 0:
        raise InfeasibleParams("bad trigger size range")

    rng = np.random.default_rng(p.seed)

    steps = rng.integers(60, 86401, size=p.commits - 1)
    stamps = np.concatenate([[BASE_TIMESTAMP], BASE_TIMESTAMP + np.cumsum(steps)])
    spacing = math.ceil(p.commits / 10)
    marker_ordinals = sorted(set(range(0, p.commits, spacing)) | {p.commits - 1})
    ids = [_commit_id(p.seed, i) for i in range(p.commits)]
    history = CommitHistory.from_pairs(zip(ids, stamps.tolist()), [ids[o] for o in marker_ordinals])

    width = len(str(max(p.passes - 1, 1)))
    names = [f"opt-{i:0{width}d}" for i in range(p.passes)]
    level_sets = _level_sets(names, rng) if names else {lvl: frozenset() for lvl in LEVELS}
    universe = PassUniverse(tuple(names), level_sets)
    for lvl in p.bug_levels:
        if lvl != "O0" and len(level_sets[lvl]) < p.min_trigger:
            raise InfeasibleParams(
                f"{lvl} enables {len(level_sets[lvl])} passes, fewer than min_trigger={p.min_trigger}"
            )
    if p.bug_levels == ("O0",) and p.min_trigger > 0:
        raise InfeasibleParams("O0 enables no passes, so its bugs cannot have triggers")

    bugs: list[BugSpec] = []
    used_ordinals: list[int] = []
    for i in range(p.bugs):
        if bugs and rng.random() < p.multi_bug_commit_rate:
            inducing = used_ordinals[int(rng.integers(len(used_ordinals)))]
        else:
            free = sorted(set(range(1, p.commits)) - set(used_ordinals))
            inducing = free[int(rng.integers(len(free)))] if free else int(rng.integers(1, p.commits))
        siblings = {(b.level, b.trigger_passes) for b in bugs if b.inducing_ordinal == inducing}
        for _ in range(64):
            level = p.bug_levels[int(rng.integers(len(p.bug_levels)))]
            pool = sorted(level_sets[level])
            if not pool or rng.random() < p.implicit_rate:
                trigger = frozenset()
            else:
                size = int(rng.integers(p.min_trigger, min(p.max_trigger, len(pool)) + 1))
                trigger = frozenset(rng.choice(pool, size=size, replace=False).tolist())
            if (level, trigger) not in siblings:
                break
        # a fixed bug must still fail at some release marker, or nobody finds it
        fixed = None
        first_marker = next(m for m in marker_ordinals if m >= inducing)
        if first_marker < p.commits - 1 and rng.random() < p.fixed_rate:
            fixed = int(rng.integers(first_marker + 1, p.commits))
        bugs.append(BugSpec(f"B{i + 1:03d}", inducing, level, trigger, fixed))
        used_ordinals.append(inducing)

    zipf = 1.0 / np.arange(1, p.bugs + 1) ** p.zipf_exponent
    counts = _allocate(n_programs, zipf[rng.permutation(p.bugs)])
    labels = [b for b, c in zip(bugs, counts) for _ in range(c)]
    labels = [labels[i] for i in rng.permutation(len(labels))]
    pwidth = len(str(n_programs))
    programs = tuple(
        TestProgram(f"P{i + 1:0{pwidth}d}", f"programs/P{i + 1:0{pwidth}d}.c", b.level, b.label)
        for i, b in enumerate(labels)
    )

    windows: dict[str, tuple[int, int]] = {}
    shifts: dict[str, int] = {}
    for prog, bug in zip(programs, labels):
        if rng.random() < p.shift_rate:
            end = bug.fixed_ordinal if bug.fixed_ordinal is not None else p.commits
            limit = max(m for m in marker_ordinals if m < end)
            shifted = min(bug.inducing_ordinal + int(rng.integers(1, p.shift_max + 1)), limit)
            if shifted > bug.inducing_ordinal:
                shifts[prog.id] = shifted
        if p.commits > 2 and rng.random() < p.crash_rate:
            length = int(rng.integers(1, p.crash_window_max + 1))
            start = int(rng.integers(1, p.commits - 1))
            windows[prog.id] = (start, min(start + length - 1, p.commits - 2))

    return World(history, universe, programs, tuple(bugs), NoiseSpec(windows, shifts), params)


# --------------------------------------------------------------------------
# oracle


class SimOracle(Oracle):
    """Oracle that reads verdicts off a :class:`World`'s ground truth."""

    def __init__(self, world: World, cache: Optional[BuildCache] = None):
        super().__init__(world.history, cache)
        self.world = world
        bugs = {b.label: b for b in world.bugs}
        self._programs = {}
        for prog in world.programs:
            bug = bugs.get(prog.ground_truth_bug)
            if bug is None:
                raise UnknownEntity(f"{prog.id} refers to unknown bug {prog.ground_truth_bug!r}")
            self._programs[prog.id] = (
                world.noise.manifestation_shift.get(prog.id, bug.inducing_ordinal),
                bug.fixed_ordinal,
                bug.level,
                bug.trigger_passes,
                world.noise.crash_windows.get(prog.id),
            )

    def _test(self, query: OracleQuery) -> OracleVerdict:
        try:
            start, fixed, level, trigger, window = self._programs[query.program_id]
        except KeyError:
            raise UnknownEntity(f"unknown program {query.program_id!r}") from None
        ordinal = self.history.get(query.commit_id).ordinal
        if window is not None and window[0] <= ordinal <= window[1]:
            return OracleVerdict(Verdict.INDETERMINATE, "compiler crashed")
        if (
            ordinal >= start
            and (fixed is None or ordinal < fixed)
            and query.config.level == level
            and not (trigger & query.config.disabled)
        ):
            return OracleVerdict(Verdict.FAIL)
        return OracleVerdict(Verdict.PASS)


def sim_oracle(world: World, query: OracleQuery) -> OracleVerdict:
    """One-off verdict without a shared cache."""
    return SimOracle(world).evaluate(query)
