import math

import pytest
from hypothesis import given, settings, strategies as st

from buglens.bisection import bisect, init_range, locate, verify
from buglens.errors import (
    FlakyOracle,
    IndeterminateBoundary,
    InconclusiveRegion,
    NoGoodVersion,
    NotFailingAtBad,
    RangeError,
)
from buglens.model import BisectionOutcome, CommitHistory, OptConfig, TestProgram, Verdict
from buglens.oracle import Oracle

from conftest import FnOracle, make_history, step_oracle


def linear_scan(history, oracle, pid, config):
    """Reference: the first FAIL in ordinal order."""
    for c in history.commits:
        if oracle.check(pid, c.id, config) is Verdict.FAIL:
            return c
    return None


def run(n, first_fail, skip=(), program=TestProgram("P1", "p.c", "O2")):
    h = make_history(n)
    o = step_oracle(h, first_fail, skip)
    return h, o, bisect(program, (h[0], h[n - 1]), h, o)


def test_eight_commits_bug_at_five(program):
    h, o, out = run(8, 5, program=program)
    assert out.inducing_commit.ordinal == 5
    assert out.inducing_commit == linear_scan(h, step_oracle(h, 5), "P1", OptConfig("O2"))
    assert out.queries <= 5
    assert out.good_bound == "c4" and out.bad_bound == "c7"


def test_single_commit_range(program):
    h = make_history(2)
    o = step_oracle(h, 1)
    out = bisect(program, (h[0], h[1]), h, o)
    assert out.inducing_commit == h[1]
    assert out.queries == 2  # endpoint checks only


def test_window_covering_boundary_is_inconclusive(program):
    with pytest.raises(InconclusiveRegion) as info:
        run(10, 5, skip={4, 5, 6}, program=program)
    err = info.value
    assert err.last_pass == "c3" and err.first_fail == "c7"
    assert err.skipped == ["c4", "c5", "c6"]


def test_skip_away_from_boundary_is_recovered(program):
    h, o, out = run(20, 12, skip={9, 10}, program=program)
    assert out.inducing_commit.ordinal == 12
    assert set(out.skipped) <= {"c9", "c10"}


def test_bad_endpoints_rejected(program):
    h = make_history(6)
    with pytest.raises(RangeError):
        bisect(program, (h[3], h[3]), h, step_oracle(h, 2))
    with pytest.raises(RangeError):
        bisect(program, (h[0], h[5]), h, step_oracle(h, 0))
    with pytest.raises(RangeError):
        bisect(program, (h[0], h[2]), h, step_oracle(h, 4))


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_bisect_matches_linear_scan_and_query_bound(data):
    n = data.draw(st.integers(2, 300))
    ff = data.draw(st.integers(1, n - 1))
    h, o, out = run(n, ff)
    assert out.inducing_commit == linear_scan(h, step_oracle(h, ff), "P1", OptConfig("O2"))
    assert out.queries <= math.ceil(math.log2(n - 1)) + 2
    assert out.skipped == ()


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_skips_never_produce_a_wrong_commit(data):
    n = data.draw(st.integers(3, 120))
    ff = data.draw(st.integers(1, n - 1))
    skip = data.draw(st.sets(st.integers(1, n - 2), max_size=n // 2))
    skip.discard(ff) if ff == n - 1 else None
    isolatable = ff not in skip and ff - 1 not in skip
    try:
        h, o, out = run(n, ff, skip)
    except InconclusiveRegion as exc:
        assert not isolatable
        region = [int(c[1:]) for c in exc.skipped]
        assert all(r in skip for r in region)
        assert int(exc.last_pass[1:]) < ff <= int(exc.first_fail[1:])
        return
    assert isolatable
    assert out.inducing_commit.ordinal == ff
    assert out.queries <= math.ceil(math.log2(n - 1)) + len(out.skipped) + 2
    assert {int(c[1:]) for c in out.skipped} <= skip


class ById(Oracle):
    def __init__(self, history, verdict_of):
        super().__init__(history)
        self.verdict_of = verdict_of

    def _test(self, query):
        from buglens.model import OracleVerdict

        return OracleVerdict(self.verdict_of[query.commit_id])


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_skip_soundness(data):
    n = data.draw(st.integers(4, 80))
    ff = data.draw(st.integers(2, n - 1))
    skip = data.draw(st.sets(st.integers(1, n - 2).filter(lambda o: o not in (ff, ff - 1)), max_size=n // 3))
    h, o, out = run(n, ff, skip)
    kept = [c for c in h.commits if c.id not in set(out.skipped)]
    h2 = CommitHistory.from_pairs(((c.id, c.timestamp) for c in kept), [kept[0].id, kept[-1].id])
    verdicts = {c.id: (Verdict.FAIL if c.ordinal >= ff else Verdict.PASS) for c in h.commits}
    for o_ in skip:
        verdicts[f"c{o_}"] = Verdict.INDETERMINATE
    program = TestProgram("P1", "p.c", "O2")
    out2 = bisect(program, (h2[0], h2[len(h2) - 1]), h2, ById(h2, verdicts))
    assert out2.inducing_commit.id == out.inducing_commit.id


# -- init_range


def marker_history():
    # r1, r2, r3 at ordinals 0, 4, 8
    return make_history(9, markers=[0, 4, 8])


def test_init_range_between_r2_and_r3(program):
    h = marker_history()
    good, bad = init_range(program, h, step_oracle(h, 6), bad=h[8])
    assert (good.id, bad.id) == ("c4", "c8")


def test_init_range_infers_bad_from_newest_marker(program):
    h = marker_history()
    assert [c.id for c in init_range(program, h, step_oracle(h, 6))] == ["c4", "c8"]


def test_init_range_bug_at_every_marker(program):
    h = marker_history()
    with pytest.raises(NoGoodVersion):
        init_range(program, h, step_oracle(h, 0), bad=h[8])


def test_init_range_walks_past_undecidable_marker(program):
    h = marker_history()
    good, bad = init_range(program, h, step_oracle(h, 6, skip={4}), bad=h[8])
    assert (good.id, bad.id) == ("c0", "c8")


def test_init_range_only_undecidable_markers(program):
    h = marker_history()
    with pytest.raises(IndeterminateBoundary):
        init_range(program, h, step_oracle(h, 1, skip={0}), bad=h[8])


def test_init_range_not_failing_at_bad(program):
    h = marker_history()
    with pytest.raises(NotFailingAtBad):
        init_range(program, h, step_oracle(h, 6), bad=h[4])
    with pytest.raises(NotFailingAtBad):
        init_range(program, h, step_oracle(h, 100))


def test_init_range_fixed_bug_uses_newest_failing_marker(program):
    h = make_history(13, markers=[0, 4, 8, 12])
    o = FnOracle(h, lambda pid, ordinal, cfg: Verdict.FAIL if 5 <= ordinal < 10 else Verdict.PASS)
    good, bad = init_range(program, h, o)
    assert (good.id, bad.id) == ("c4", "c8")
    assert locate(program, h, o).inducing_commit.id == "c5"


# -- verify


def test_verify_deterministic_outcome(program):
    h, o, out = run(30, 17, program=program)
    assert not out.verified
    assert verify(out, program, h, o).verified


def test_verify_detects_flipped_predecessor(program):
    h, o, out = run(30, 17, program=program)
    flipped = step_oracle(h, 16)
    with pytest.raises(FlakyOracle) as info:
        verify(out, program, h, flipped)
    assert info.value.outcome.verified is False
    assert info.value.outcome.inducing_commit.ordinal == 17


def test_verify_detects_flipped_inducing_commit(program):
    h, o, out = run(30, 17, program=program)
    with pytest.raises(FlakyOracle):
        verify(out, program, h, step_oracle(h, 18))


def test_verify_skips_undecidable_predecessor(program):
    h, o, out = run(12, 5, program=program)
    seen = []

    def fn(pid, ordinal, cfg):
        seen.append(ordinal)
        if ordinal == 4:
            return Verdict.INDETERMINATE
        return Verdict.FAIL if ordinal >= 5 else Verdict.PASS

    assert verify(out, program, h, FnOracle(h, fn)).verified
    assert seen == [5, 4, 3]


def test_verify_skips_recorded_skipped_predecessor(program):
    h = make_history(12)
    seen = []

    def fn(pid, ordinal, cfg):
        seen.append(ordinal)
        return Verdict.FAIL if ordinal >= 5 else Verdict.PASS

    outcome = BisectionOutcome("P1", h[5], "c2", "c11", 6, False, ("c4",))
    assert verify(outcome, program, h, FnOracle(h, fn)).verified
    assert seen == [5, 3]


def test_locate_returns_unverified_on_flaky_oracle(program):
    h = make_history(40)
    calls = {"n": 0}

    def fn(pid, ordinal, cfg):
        if ordinal == 21:
            calls["n"] += 1
            return Verdict.FAIL if calls["n"] == 1 else Verdict.PASS
        return Verdict.FAIL if ordinal >= 21 else Verdict.PASS

    out = locate(program, h, FnOracle(h, fn))
    assert out.inducing_commit.ordinal == 21
    assert out.verified is False


def test_locate_verifies(program):
    h = make_history(64, markers=[0, 16, 32, 48, 63])
    out = locate(program, h, step_oracle(h, 37))
    assert out.inducing_commit.ordinal == 37 and out.verified
