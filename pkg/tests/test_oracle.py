import threading
import time

import pytest

from buglens.errors import BuildFailure, UnknownEntity
from buglens.model import OptConfig, OracleQuery, TestProgram, Verdict
from buglens.oracle import AdapterConfig, BuildCache, ExternalOracle, render_flags

from conftest import FnOracle, make_history

CFG = OptConfig("O2")


def external(tmp_path, test_cmd, build_cmd="true", timeout=30, **kw):
    h = make_history(4)
    progs = [TestProgram("P1", "p 1.c", "O2")]
    cfg = AdapterConfig(build_cmd, test_cmd, timeout_secs=timeout, cache_dir=str(tmp_path / "cache"), **kw)
    return ExternalOracle(h, progs, cfg)


@pytest.mark.parametrize("code,expected", [(0, Verdict.PASS), (1, Verdict.FAIL), (125, Verdict.INDETERMINATE)])
def test_exit_code_mapping(tmp_path, code, expected):
    o = external(tmp_path, f"exit {code}")
    assert o.check("P1", "c1", CFG) is expected


def test_other_exit_code_is_build_failure(tmp_path):
    o = external(tmp_path, "exit 3")
    with pytest.raises(BuildFailure):
        o.check("P1", "c1", CFG)


def test_failing_build_raises_and_is_cached(tmp_path):
    counter = tmp_path / "n"
    o = external(tmp_path, "exit 0", build_cmd=f"echo x >> {counter}; exit 2")
    for _ in range(2):
        with pytest.raises(BuildFailure):
            o.check("P1", "c1", CFG)
    assert counter.read_text().count("x") == 1
    assert o.cache.built == set()


def test_test_timeout_is_indeterminate(tmp_path):
    o = external(tmp_path, "sleep 5", timeout=0.2)
    v = o.evaluate(OracleQuery("P1", "c1", CFG))
    assert v.outcome is Verdict.INDETERMINATE and v.detail == "timeout"


def test_placeholders_are_substituted_and_quoted(tmp_path):
    out = tmp_path / "args"
    o = external(
        tmp_path,
        f"printf '%s\\n' {{commit}} {{program}} {{flags}} > {out}; exit 1",
        build_cmd="mkdir -p {build_dir} && test -d {build_dir}",
    )
    assert o.check("P1", "c2", OptConfig("O3", frozenset({"gcse", "dce"}))) is Verdict.FAIL
    assert out.read_text().split("\n")[:5] == ["c2", "p 1.c", "-O3", "-fno-dce", "-fno-gcse"]
    assert (tmp_path / "cache" / "c2" / "DONE").exists()


def test_sentinel_skips_build(tmp_path):
    (tmp_path / "cache" / "c1").mkdir(parents=True)
    (tmp_path / "cache" / "c1" / "DONE").write_text("")
    o = external(tmp_path, "exit 0", build_cmd="exit 9")
    assert o.check("P1", "c1", CFG) is Verdict.PASS
    assert "c1" in o.cache.built


def test_cache_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("BUGLENS_CACHE_DIR", str(tmp_path / "env"))
    cfg = AdapterConfig.from_json({"checkout_build_cmd": "true", "test_cmd": "true", "cache_dir": "elsewhere"})
    assert cfg.cache_dir == str(tmp_path / "env")


def test_adapter_requires_commands():
    with pytest.raises(ValueError):
        AdapterConfig.from_json({"test_cmd": "true"})


def test_render_flags():
    assert render_flags(OptConfig("Os")) == "-Os"
    assert render_flags(OptConfig("O1", frozenset({"b", "a"}))) == "-O1 -fno-a -fno-b"
    style = {"level": "-{level}", "disable": "-mllvm -disable-{pass}"}
    assert render_flags(OptConfig("O2", frozenset({"licm"})), style) == "-O2 -mllvm -disable-licm"


def test_unknown_commit_rejected():
    o = FnOracle(make_history(3), lambda *a: Verdict.PASS)
    with pytest.raises(UnknownEntity):
        o.check("P1", "nope", CFG)


def test_build_stats_three_programs_same_five_commits():
    o = FnOracle(make_history(8), lambda *a: Verdict.PASS)
    for pid in ("P1", "P2", "P3"):
        for i in range(5):
            o.check(pid, f"c{i}", CFG)
    built, per_case = o.build_stats()
    assert built == 5
    assert per_case == pytest.approx(5 / 3)
    assert o.cache.builds_performed == 5


def test_build_stats_one_program_four_commits():
    o = FnOracle(make_history(8), lambda *a: Verdict.PASS)
    for i in (0, 3, 5, 7, 3):
        o.check("P1", f"c{i}", CFG)
    assert o.build_stats() == (4, 4.0)


def test_build_stats_needs_a_query():
    with pytest.raises(ValueError):
        FnOracle(make_history(2), lambda *a: Verdict.PASS).build_stats()


def test_single_flight_under_concurrency():
    cache = BuildCache(parallelism=4)
    calls = []
    gate = threading.Barrier(16)

    def build(cid):
        calls.append(cid)
        time.sleep(0.05)

    def worker():
        gate.wait()
        cache.ensure("c7", build)
        assert "c7" in cache.built

    threads = [threading.Thread(target=worker) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert calls == ["c7"]
    assert cache.builds_performed == 1


def test_concurrent_waiters_see_failure():
    cache = BuildCache()
    errors = []

    def build(cid):
        time.sleep(0.05)
        raise RuntimeError("boom")

    def worker():
        try:
            cache.ensure("c1", build)
        except BuildFailure as exc:
            errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(errors) == 8
    assert cache.built == set()


def test_built_set_is_monotone():
    o = FnOracle(make_history(6), lambda *a: Verdict.PASS)
    sizes = []
    for i in (2, 2, 4, 0, 4, 5):
        o.check("P1", f"c{i}", CFG)
        sizes.append(len(o.cache.built))
    assert sizes == sorted(sizes)
