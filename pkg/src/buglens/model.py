"""Domain types shared across the pipeline, plus their JSON encodings.

All types are frozen dataclasses. Constructors are deliberately lenient so
that :func:`validate_dataset` can report every problem in a malformed
dataset at once instead of stopping at the first one.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

LEVELS = ("O0", "O1", "O2", "O3", "Os")


class Verdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class Commit:
    id: str
    timestamp: int
    ordinal: int


@dataclass(frozen=True)
class CommitHistory:
    commits: tuple[Commit, ...]
    release_markers: tuple[str, ...] = ()

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, float]], release_markers=()) -> "CommitHistory":
        """Build a history from ``(id, timestamp)`` pairs in ordinal order.

        Sub-second timestamps are truncated.
        """
        commits = tuple(Commit(str(cid), int(ts), i) for i, (cid, ts) in enumerate(pairs))
        return cls(commits, tuple(release_markers))

    @cached_property
    def _index(self) -> dict[str, Commit]:
        return {c.id: c for c in self.commits}

    def __len__(self):
        return len(self.commits)

    def __getitem__(self, ordinal: int) -> Commit:
        return self.commits[ordinal]

    def __contains__(self, commit_id) -> bool:
        return commit_id in self._index

    def get(self, commit_id: str) -> Commit:
        try:
            return self._index[commit_id]
        except KeyError:
            raise KeyError(f"unknown commit {commit_id!r}") from None

    def markers(self) -> list[Commit]:
        """Release markers as commits, oldest first."""
        return sorted((self.get(m) for m in self.release_markers), key=lambda c: c.ordinal)

    def to_json(self) -> dict:
        return {
            "commits": [{"id": c.id, "timestamp": c.timestamp} for c in self.commits],
            "release_markers": list(self.release_markers),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "CommitHistory":
        return cls.from_pairs(
            ((c["id"], c["timestamp"]) for c in data["commits"]),
            data.get("release_markers", ()),
        )


@dataclass(frozen=True)
class TestProgram:
    __test__ = False  # keep pytest from collecting this class

    id: str
    source_ref: str
    fail_level: str
    ground_truth_bug: Optional[str] = None

    def to_json(self) -> dict:
        out = {"id": self.id, "source_ref": self.source_ref, "fail_level": self.fail_level}
        if self.ground_truth_bug is not None:
            out["ground_truth_bug"] = self.ground_truth_bug
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "TestProgram":
        return cls(
            str(data["id"]),
            str(data.get("source_ref", "")),
            str(data["fail_level"]),
            data.get("ground_truth_bug"),
        )


@dataclass(frozen=True)
class PassUniverse:
    passes: tuple[str, ...]
    level_sets: Mapping[str, frozenset[str]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.passes)

    @cached_property
    def position(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.passes)}

    def level_passes(self, level: str) -> list[str]:
        """Passes explicitly enabled by ``level``, in universe order."""
        enabled = self.level_sets.get(level, frozenset())
        return [p for p in self.passes if p in enabled]

    def __eq__(self, other):
        if not isinstance(other, PassUniverse):
            return NotImplemented
        return self.passes == other.passes and dict(self.level_sets) == dict(other.level_sets)

    def __hash__(self):
        return hash(self.passes)

    def to_json(self) -> dict:
        return {
            "passes": list(self.passes),
            "level_sets": {lvl: self.level_passes(lvl) for lvl in sorted(self.level_sets)},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "PassUniverse":
        return cls(
            tuple(data["passes"]),
            {lvl: frozenset(names) for lvl, names in data.get("level_sets", {}).items()},
        )


@dataclass(frozen=True)
class OptConfig:
    level: str
    disabled: frozenset[str] = frozenset()

    def to_json(self) -> dict:
        return {"level": self.level, "disabled": sorted(self.disabled)}

    @classmethod
    def from_json(cls, data: Mapping) -> "OptConfig":
        return cls(data["level"], frozenset(data.get("disabled", ())))


@dataclass(frozen=True)
class OptVector:
    """Optimisation level plus a bit per universe pass marking the minimal set."""

    level: str
    bits: tuple[int, ...]

    @classmethod
    def from_passes(cls, level: str, on: Iterable[str], universe: PassUniverse) -> "OptVector":
        on = set(on)
        return cls(level, tuple(1 if p in on else 0 for p in universe.passes))

    @property
    def n(self) -> int:
        return len(self.bits)

    def on(self, universe: Optional[PassUniverse] = None) -> list[str]:
        if universe is None:
            return [str(i) for i, b in enumerate(self.bits) if b]
        return [p for p, b in zip(universe.passes, self.bits) if b]

    def to_json(self, universe: PassUniverse) -> dict:
        return {"level": self.level, "on": self.on(universe), "n": self.n}

    @classmethod
    def from_json(cls, data: Mapping, universe: PassUniverse) -> "OptVector":
        unknown = set(data["on"]) - set(universe.passes)
        if unknown:
            raise ValueError(f"passes not in universe: {sorted(unknown)}")
        return cls.from_passes(data["level"], data["on"], universe)


def universe_from_vectors(records: Iterable[Mapping]) -> PassUniverse:
    """Reconstruct a pass universe from serialised vectors that carry ``n``.

    Only mismatch counts matter for distances, so names that no vector turns
    on are replaced by placeholder slots.
    """
    records = list(records)
    names = sorted({name for r in records for name in r["on"]})
    dims = {int(r["n"]) for r in records}
    if len(dims) > 1:
        raise ValueError(f"vectors of differing dimension: {sorted(dims)}")
    n = dims.pop() if dims else len(names)
    if len(names) > n:
        raise ValueError("more distinct passes than vector dimension")
    padding = [f"<unused-{i}>" for i in range(n - len(names))]
    return PassUniverse(tuple(names + padding), {})


@dataclass(frozen=True)
class OracleQuery:
    program_id: str
    commit_id: str
    config: OptConfig


@dataclass(frozen=True)
class OracleVerdict:
    outcome: Verdict
    detail: str = ""

    def to_json(self) -> dict:
        return {"outcome": self.outcome.value, "detail": self.detail}

    @classmethod
    def from_json(cls, data: Mapping) -> "OracleVerdict":
        return cls(Verdict(data["outcome"]), data.get("detail", ""))


PASS = OracleVerdict(Verdict.PASS)
FAIL = OracleVerdict(Verdict.FAIL)


@dataclass(frozen=True)
class BisectionOutcome:
    program_id: str
    inducing_commit: Commit
    good_bound: str
    bad_bound: str
    queries: int
    verified: bool = False
    skipped: tuple[str, ...] = ()

    def to_json(self) -> dict:
        c = self.inducing_commit
        return {
            "program_id": self.program_id,
            "inducing_commit": {"id": c.id, "timestamp": c.timestamp, "ordinal": c.ordinal},
            "good_bound": self.good_bound,
            "bad_bound": self.bad_bound,
            "queries": self.queries,
            "verified": self.verified,
            "skipped": list(self.skipped),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "BisectionOutcome":
        c = data["inducing_commit"]
        return cls(
            data["program_id"],
            Commit(c["id"], int(c["timestamp"]), int(c["ordinal"])),
            data["good_bound"],
            data["bad_bound"],
            int(data["queries"]),
            bool(data.get("verified", False)),
            tuple(data.get("skipped", ())),
        )


@dataclass(frozen=True)
class Fingerprint:
    program_id: str
    commit: Commit
    vector: OptVector

    def to_json(self, universe: PassUniverse) -> dict:
        c = self.commit
        return {
            "program_id": self.program_id,
            "commit": {"id": c.id, "timestamp": c.timestamp, "ordinal": c.ordinal},
            "vector": self.vector.to_json(universe),
        }

    @classmethod
    def from_json(cls, data: Mapping, universe: PassUniverse) -> "Fingerprint":
        c = data["commit"]
        return cls(
            data["program_id"],
            Commit(c["id"], int(c["timestamp"]), int(c.get("ordinal", -1))),
            OptVector.from_json(data["vector"], universe),
        )


@dataclass(frozen=True)
class RankedList:
    order: tuple[str, ...]
    seed: int

    def to_json(self) -> dict:
        return {"order": list(self.order), "seed": self.seed}

    @classmethod
    def from_json(cls, data: Mapping) -> "RankedList":
        return cls(tuple(data["order"]), int(data["seed"]))


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    subject: str
    message: str

    def __str__(self):
        return f"{self.subject}: {self.message}"


def validate_dataset(
    history: CommitHistory,
    programs: Sequence[TestProgram],
    universe: Optional[PassUniverse] = None,
) -> list[Violation]:
    """Return every invariant violation in the dataset; empty means well-formed."""
    out: list[Violation] = []
    seen: set[str] = set()
    prev = None
    for i, c in enumerate(history.commits):
        if c.id in seen:
            out.append(Violation(f"commit {c.id}", "duplicate commit id"))
        seen.add(c.id)
        if c.ordinal != i:
            out.append(Violation(f"commit {c.id}", f"ordinal {c.ordinal} != position {i}"))
        if prev is not None and c.timestamp < prev.timestamp:
            out.append(
                Violation(
                    f"commit {c.id}",
                    f"timestamp {c.timestamp} precedes {prev.id} ({prev.timestamp})",
                )
            )
        prev = c
    for m in history.release_markers:
        if m not in seen:
            out.append(Violation(f"release marker {m}", "not present in history"))

    pids: set[str] = set()
    for p in programs:
        if p.id in pids:
            out.append(Violation(f"program {p.id}", "duplicate program id"))
        pids.add(p.id)
        if p.fail_level not in LEVELS:
            out.append(Violation(f"program {p.id}", f"unknown optimisation level {p.fail_level!r}"))

    if universe is not None:
        names = set()
        for name in universe.passes:
            if name in names:
                out.append(Violation(f"pass {name}", "duplicate pass name"))
            names.add(name)
        for lvl, members in sorted(universe.level_sets.items()):
            if lvl not in LEVELS:
                out.append(Violation(f"level set {lvl}", "unknown optimisation level"))
            for name in sorted(set(members) - names):
                out.append(Violation(f"level set {lvl}", f"pass {name!r} not in universe"))
    return out


# --------------------------------------------------------------------------
# file IO


def read_json(path) -> object:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_history(path) -> CommitHistory:
    return CommitHistory.from_json(read_json(path))


def load_programs(path) -> list[TestProgram]:
    return [TestProgram.from_json(d) for d in read_json(path)]


def load_universe(path) -> PassUniverse:
    return PassUniverse.from_json(read_json(path))


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, stable float formatting."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json_atomic(path, obj) -> None:
    write_text_atomic(path, dumps(obj))


def write_text_atomic(path, text: str) -> None:
    import os
    import tempfile

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
