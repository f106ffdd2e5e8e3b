import pytest

from buglens.model import CommitHistory, OracleVerdict, TestProgram, Verdict
from buglens.oracle import Oracle


def make_history(n, markers=None, step=100, start=1000):
    """Linear history c0..c{n-1} with evenly spaced timestamps."""
    ids = [f"c{i}" for i in range(n)]
    if markers is None:
        markers = [0, n - 1]
    return CommitHistory.from_pairs(
        ((cid, start + step * i) for i, cid in enumerate(ids)),
        [ids[m] for m in markers],
    )


class FnOracle(Oracle):
    """Oracle whose verdict is ``fn(program_id, ordinal, config)``."""

    def __init__(self, history, fn):
        super().__init__(history)
        self.fn = fn

    def _test(self, query):
        ordinal = self.history.get(query.commit_id).ordinal
        v = self.fn(query.program_id, ordinal, query.config)
        return v if isinstance(v, OracleVerdict) else OracleVerdict(v)


def step_oracle(history, first_fail, skip=(), level="O2"):
    """PASS before ``first_fail``, FAIL from it on; ordinals in ``skip`` are undecidable."""
    skip = set(skip)

    def fn(pid, ordinal, config):
        if ordinal in skip:
            return Verdict.INDETERMINATE
        return Verdict.FAIL if ordinal >= first_fail and config.level == level else Verdict.PASS

    return FnOracle(history, fn)


@pytest.fixture
def program():
    return TestProgram("P1", "p1.c", "O2", "B1")


# -- acceptance reporting

ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = self.detail if exc is None else f"{self.detail} {type(exc).__name__}: {exc}".strip()
        ACCEPTANCE[self.number] = (status, self.title, detail.splitlines()[0] if detail else "")
        return False


@pytest.fixture
def criterion():
    """``with criterion(n, title) as c: ...`` records PASS/FAIL for the summary."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {status}: {title} ({detail})")
