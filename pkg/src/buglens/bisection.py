"""Locating the earliest failure-inducing commit for a test program."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional

from buglens.errors import (
    FlakyOracle,
    IndeterminateBoundary,
    InconclusiveRegion,
    NoGoodVersion,
    NotFailingAtBad,
    RangeError,
)
from buglens.model import (
    BisectionOutcome,
    Commit,
    CommitHistory,
    OptConfig,
    TestProgram,
    Verdict,
)
from buglens.oracle import Oracle

log = logging.getLogger(__name__)


def base_config(program: TestProgram) -> OptConfig:
    return OptConfig(program.fail_level)


def init_range(
    program: TestProgram,
    history: CommitHistory,
    oracle: Oracle,
    bad: Optional[Commit] = None,
) -> tuple[Commit, Commit]:
    """Bracket the failure between two release markers.

    Without an explicit ``bad``, the bad bound is the newest release marker
    (the history tail when there are none) at which the program fails; for a
    bug still present at head that is simply the newest marker. Older markers
    are then tested newest-first and the first one that passes becomes the
    good bound.
    """
    config = base_config(program)
    markers = history.markers()
    if bad is None:
        for candidate in reversed(markers or [history[len(history) - 1]]):
            if oracle.check(program.id, candidate.id, config) is Verdict.FAIL:
                bad = candidate
                break
        else:
            raise NotFailingAtBad(f"{program.id} fails at no release marker")
    else:
        verdict = oracle.check(program.id, bad.id, config)
        if verdict is not Verdict.FAIL:
            raise NotFailingAtBad(f"{program.id} does not fail at {bad.id} ({verdict.value})")

    undecidable = []
    for marker in reversed(markers):
        if marker.ordinal >= bad.ordinal:
            continue
        verdict = oracle.check(program.id, marker.id, config)
        if verdict is Verdict.PASS:
            return marker, bad
        if verdict is Verdict.INDETERMINATE:
            undecidable.append(marker.id)
    if undecidable:
        raise IndeterminateBoundary(
            f"{program.id}: no passing release before {bad.id}; undecidable at {undecidable}"
        )
    raise NoGoodVersion(f"{program.id}: fails at every release before {bad.id}")


def _probe_order(untested: list[int], mid: int):
    """Positions in ``untested`` ordered mid, mid-1, mid+1, mid-2, ..."""
    yield mid
    for step in range(1, len(untested)):
        if mid - step >= 0:
            yield mid - step
        if mid + step < len(untested):
            yield mid + step


def bisect(
    program: TestProgram,
    bounds: tuple[Commit, Commit],
    history: CommitHistory,
    oracle: Oracle,
    config: Optional[OptConfig] = None,
) -> BisectionOutcome:
    """Binary search for the first failing commit in ``(good, bad]``.

    Undecidable commits are skipped by probing their nearest untested
    neighbours. If the first failure cannot be isolated because every commit
    left between the last pass and the first failure is undecidable,
    :class:`InconclusiveRegion` is raised instead of guessing.
    """
    config = config or base_config(program)
    good, bad = bounds
    if good.ordinal >= bad.ordinal:
        raise RangeError(f"good bound {good.id} does not precede bad bound {bad.id}")

    queries = 0

    def check(commit: Commit) -> Verdict:
        nonlocal queries
        queries += 1
        return oracle.check(program.id, commit.id, config)

    if (v := check(good)) is not Verdict.PASS:
        raise RangeError(f"{program.id}: good bound {good.id} is {v.value}")
    if (v := check(bad)) is not Verdict.FAIL:
        raise RangeError(f"{program.id}: bad bound {bad.id} is {v.value}")

    lo, hi = good.ordinal, bad.ordinal
    skipped: set[int] = set()
    while True:
        untested = [o for o in range(lo + 1, hi) if o not in skipped]
        if not untested:
            break
        # candidates are untested + [hi]; split them as evenly as possible
        mid = (len(untested) + 1) // 2 - 1
        for pos in _probe_order(untested, mid):
            ordinal = untested[pos]
            verdict = check(history[ordinal])
            if verdict is Verdict.INDETERMINATE:
                skipped.add(ordinal)
                continue
            if verdict is Verdict.PASS:
                lo = ordinal
            else:
                hi = ordinal
            break

    skipped_ids = tuple(history[o].id for o in sorted(skipped))
    if hi - lo > 1:
        raise InconclusiveRegion(
            program.id,
            history[lo].id,
            history[hi].id,
            [history[o].id for o in range(lo + 1, hi)],
        )
    return BisectionOutcome(
        program_id=program.id,
        inducing_commit=history[hi],
        good_bound=history[lo].id,
        bad_bound=bad.id,
        queries=queries,
        verified=False,
        skipped=skipped_ids,
    )


def verify(
    outcome: BisectionOutcome,
    program: TestProgram,
    history: CommitHistory,
    oracle: Oracle,
    config: Optional[OptConfig] = None,
) -> BisectionOutcome:
    """Re-check that the inducing commit fails and its predecessor passes.

    The predecessor is the nearest earlier commit that is neither recorded as
    skipped nor undecidable now.
    Raises :class:`FlakyOracle` (carrying the outcome marked unverified) when
    the re-query contradicts the bisection.
    """
    config = config or base_config(program)
    unverified = replace(outcome, verified=False)
    c = outcome.inducing_commit
    verdict = oracle.check(program.id, c.id, config)
    if verdict is not Verdict.FAIL:
        raise FlakyOracle(unverified, f"inducing commit {c.id} re-tested {verdict.value}")

    skipped = set(outcome.skipped)
    for ordinal in range(c.ordinal - 1, -1, -1):
        prev = history[ordinal]
        if prev.id in skipped:
            continue
        verdict = oracle.check(program.id, prev.id, config)
        if verdict is Verdict.INDETERMINATE:
            continue
        if verdict is Verdict.FAIL:
            raise FlakyOracle(unverified, f"predecessor {prev.id} re-tested FAIL")
        return replace(outcome, verified=True)
    raise FlakyOracle(unverified, "no decidable predecessor")


def locate(
    program: TestProgram,
    history: CommitHistory,
    oracle: Oracle,
    bad: Optional[Commit] = None,
    check: bool = True,
) -> BisectionOutcome:
    """init_range + bisect (+ verify unless ``check`` is false).

    Verification failures are logged and returned as unverified outcomes.
    """
    bounds = init_range(program, history, oracle, bad)
    outcome = bisect(program, bounds, history, oracle)
    if not check:
        return outcome
    try:
        return verify(outcome, program, history, oracle)
    except FlakyOracle as exc:
        log.warning("verification failed: %s", exc)
        return exc.outcome
