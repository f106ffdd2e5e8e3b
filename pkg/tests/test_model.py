import json

from hypothesis import given, strategies as st

from buglens.model import (
    BisectionOutcome,
    Commit,
    CommitHistory,
    Fingerprint,
    OptConfig,
    OptVector,
    OracleVerdict,
    PassUniverse,
    RankedList,
    TestProgram,
    Verdict,
    universe_from_vectors,
    validate_dataset,
)

from conftest import make_history

UNIVERSE = PassUniverse(("a", "b", "c", "d"), {"O1": frozenset("ab"), "O2": frozenset("abcd")})


def roundtrip(obj):
    return json.loads(json.dumps(obj))


def test_well_formed_dataset_has_no_violations():
    h = make_history(5, markers=[0, 2, 4])
    progs = [TestProgram("P1", "x.c", "O2"), TestProgram("P2", "y.c", "Os", "B1")]
    assert validate_dataset(h, progs, UNIVERSE) == []


def test_unknown_level_is_one_violation_naming_the_program():
    h = make_history(3)
    problems = validate_dataset(h, [TestProgram("P9", "x.c", "O9")], UNIVERSE)
    assert len(problems) == 1
    assert "P9" in str(problems[0])


def test_decreasing_timestamps_is_one_violation():
    h = CommitHistory.from_pairs([("a", 5), ("b", 3)])
    problems = validate_dataset(h, [], None)
    assert len(problems) == 1
    assert "timestamp" in problems[0].message


def test_other_violations_are_reported():
    h = CommitHistory.from_pairs([("a", 1), ("a", 2)], ["zzz"])
    bad_universe = PassUniverse(("x", "x"), {"O1": frozenset({"y"})})
    problems = {str(p) for p in validate_dataset(h, [TestProgram("P", "", "O1")] * 2, bad_universe)}
    assert any("duplicate commit" in p for p in problems)
    assert any("zzz" in p for p in problems)
    assert any("duplicate program" in p for p in problems)
    assert any("duplicate pass" in p for p in problems)
    assert any("'y'" in p for p in problems)


def test_equal_timestamps_are_allowed():
    h = CommitHistory.from_pairs([("a", 5), ("b", 5)])
    assert validate_dataset(h, []) == []


def test_subsecond_timestamps_truncate():
    h = CommitHistory.from_json({"commits": [{"id": "a", "timestamp": 12.9}], "release_markers": []})
    assert h[0].timestamp == 12


def test_history_roundtrip():
    h = make_history(6, markers=[0, 3, 5])
    assert CommitHistory.from_json(roundtrip(h.to_json())) == h
    assert [c.ordinal for c in h.commits] == list(range(6))


def test_universe_roundtrip():
    assert PassUniverse.from_json(roundtrip(UNIVERSE.to_json())) == UNIVERSE


def test_small_types_roundtrip():
    p = TestProgram("P1", "src/p.c", "O3", "B7")
    assert TestProgram.from_json(roundtrip(p.to_json())) == p
    q = TestProgram("P2", "src/q.c", "O0")
    assert TestProgram.from_json(roundtrip(q.to_json())) == q
    cfg = OptConfig("O2", frozenset({"b", "a"}))
    assert OptConfig.from_json(roundtrip(cfg.to_json())) == cfg
    v = OracleVerdict(Verdict.INDETERMINATE, "crash")
    assert OracleVerdict.from_json(roundtrip(v.to_json())) == v
    r = RankedList(("P2", "P1"), 5)
    assert RankedList.from_json(roundtrip(r.to_json())) == r


def test_outcome_and_fingerprint_roundtrip():
    c = Commit("c5", 1500, 5)
    o = BisectionOutcome("P1", c, "c4", "c9", 6, True, ("c3",))
    assert BisectionOutcome.from_json(roundtrip(o.to_json())) == o
    fp = Fingerprint("P1", c, OptVector.from_passes("O2", ["b", "d"], UNIVERSE))
    back = Fingerprint.from_json(roundtrip(fp.to_json(UNIVERSE)), UNIVERSE)
    assert back == fp
    assert fp.to_json(UNIVERSE)["vector"] == {"level": "O2", "on": ["b", "d"], "n": 4}


def test_universe_from_vectors_preserves_mismatch_structure():
    records = [{"level": "O2", "on": ["x", "y"], "n": 6}, {"level": "O1", "on": ["y"], "n": 6}]
    u = universe_from_vectors(records)
    a, b = (OptVector.from_json(r, u) for r in records)
    assert u.n == 6
    assert sum(x != y for x, y in zip(a.bits, b.bits)) == 1


@given(
    st.lists(st.integers(0, 10**10), min_size=1, max_size=30),
    st.data(),
)
def test_history_roundtrip_property(steps, data):
    ts, acc = [], 0
    for s in steps:
        acc += s
        ts.append(acc)
    ids = [f"id{i}" for i in range(len(ts))]
    markers = data.draw(st.lists(st.sampled_from(ids), unique=True))
    h = CommitHistory.from_pairs(zip(ids, ts), markers)
    assert CommitHistory.from_json(roundtrip(h.to_json())) == h
    assert validate_dataset(h, []) == []


@given(st.sampled_from(["O0", "O1", "O2", "O3", "Os"]), st.sets(st.sampled_from("abcd")))
def test_vector_roundtrip_property(level, on):
    v = OptVector.from_passes(level, on, UNIVERSE)
    assert OptVector.from_json(roundtrip(v.to_json(UNIVERSE)), UNIVERSE) == v
    assert set(v.on(UNIVERSE)) == on
