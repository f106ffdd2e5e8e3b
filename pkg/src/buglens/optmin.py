"""Minimal bug-triggering optimisation pass sets via ddmin.

Probes keep the program's optimisation level active and switch off every
pass outside the candidate subset, so optimisations that the level turns on
implicitly (and that have no flag of their own) stay in effect.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Hashable, Sequence, TypeVar

from buglens.errors import NotReproducibleAtCommit
from buglens.model import Commit, OptConfig, OptVector, PassUniverse, TestProgram, Verdict
from buglens.oracle import Oracle

log = logging.getLogger(__name__)

T = TypeVar("T", bound=Hashable)


def split(items: Sequence[T], n: int) -> list[list[T]]:
    """Cut ``items`` into ``n`` contiguous chunks whose sizes differ by at most one."""
    k, r = divmod(len(items), n)
    out, start = [], 0
    for i in range(n):
        end = start + k + (1 if i < r else 0)
        out.append(list(items[start:end]))
        start = end
    return out


def ddmin(items: Sequence[T], fails: Callable[[list[T]], bool]) -> list[T]:
    """Reduce ``items`` to a 1-minimal list for which ``fails`` holds.

    ``fails(items)`` must already be true. Chunks are tried first, then their
    complements; when neither reduces, granularity doubles.
    """
    items = list(items)
    n = 2
    while len(items) >= 2:
        parts = split(items, n)
        for part in parts:
            if fails(part):
                items, n = part, 2
                break
        else:
            for i in range(len(parts)):
                complement = [x for j, p in enumerate(parts) if j != i for x in p]
                if fails(complement):
                    items, n = complement, max(n - 1, 2)
                    break
            else:
                if n >= len(items):
                    break
                n = min(2 * n, len(items))
    return items


@dataclass(frozen=True)
class MinimizedOpts:
    vector: OptVector
    on: tuple[str, ...]
    probes: int
    certified: bool  # False when an undecidable probe blocked the 1-minimality sweep


def minimize_opts(
    program: TestProgram,
    commit: Commit,
    universe: PassUniverse,
    oracle: Oracle,
) -> MinimizedOpts:
    level = program.fail_level
    everything = frozenset(universe.passes)
    verdicts: dict[frozenset, Verdict] = {}

    def probe(enabled) -> Verdict:
        disabled = everything - frozenset(enabled)
        if disabled not in verdicts:
            verdicts[disabled] = oracle.check(program.id, commit.id, OptConfig(level, disabled))
        return verdicts[disabled]

    def fails(enabled) -> bool:
        return probe(enabled) is Verdict.FAIL

    base = oracle.check(program.id, commit.id, OptConfig(level))
    if base is not Verdict.FAIL:
        raise NotReproducibleAtCommit(f"{program.id} is {base.value} at {commit.id} with -{level}")
    candidates = universe.level_passes(level)
    if not fails(candidates):
        raise NotReproducibleAtCommit(
            f"{program.id} needs passes outside the {level} set at {commit.id}"
        )

    on = [] if fails([]) else ddmin(candidates, fails)

    # explicit sweep rather than trusting ddmin's trace
    certified = True
    changed = True
    while changed:
        changed = False
        for p in list(on):
            rest = [q for q in on if q != p]
            v = probe(rest)
            if v is Verdict.FAIL:
                log.debug("%s: sweep dropped %s", program.id, p)
                on, changed = rest, True
                break
            if v is Verdict.INDETERMINATE:
                certified = False
    if not certified:
        log.warning("%s: minimal pass set could not be certified 1-minimal", program.id)

    return MinimizedOpts(
        vector=OptVector.from_passes(level, on, universe),
        on=tuple(on),
        probes=len(verdicts) + 1,
        certified=certified,
    )
