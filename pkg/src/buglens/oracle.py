"""Three-valued test oracles over a commit history, with a shared build cache.

An oracle answers "does program P fail at commit c under this optimisation
configuration?". Every concrete backend goes through :meth:`Oracle.evaluate`,
which guarantees the commit is built (at most once per run) before the test
runs and keeps the counters used for efficiency accounting.
"""

from __future__ import annotations

import logging
import os
import shlex
import subprocess
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from buglens.errors import BuildFailure, UnknownEntity
from buglens.model import (
    CommitHistory,
    OptConfig,
    OracleQuery,
    OracleVerdict,
    TestProgram,
    Verdict,
    read_json,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_SECS = 600


class BuildCache:
    """Single-flight record of which compiler versions exist.

    Concurrent requests for the same unbuilt commit run the build once; the
    other callers block until it finishes. Distinct commits build in parallel,
    bounded by ``parallelism``. With ``cache_dir`` set, a ``DONE`` sentinel in
    ``cache_dir/<commit>/`` marks a version as already produced on disk.
    """

    def __init__(self, parallelism: Optional[int] = None, cache_dir=None):
        self.built: set[str] = set()
        self.in_flight: dict[str, threading.Event] = {}
        self.builds_performed = 0
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self._failures: dict[str, BuildFailure] = {}
        self._lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(parallelism or os.cpu_count() or 1)

    def build_dir(self, commit_id: str) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        return self.cache_dir / commit_id

    def _sentinel(self, commit_id: str) -> Optional[Path]:
        d = self.build_dir(commit_id)
        return None if d is None else d / "DONE"

    def ensure(self, commit_id: str, build: Optional[Callable[[str], None]] = None) -> None:
        """Make sure ``commit_id`` is built, running ``build`` at most once."""
        with self._lock:
            if commit_id in self.built:
                return
            if commit_id in self._failures:
                raise self._failures[commit_id]
            event = self.in_flight.get(commit_id)
            owner = event is None
            if owner:
                event = self.in_flight[commit_id] = threading.Event()
        if not owner:
            event.wait()
            with self._lock:
                if commit_id in self._failures:
                    raise self._failures[commit_id]
            return
        try:
            sentinel = self._sentinel(commit_id)
            if sentinel is None or not sentinel.exists():
                if build is not None:
                    with self._slots:
                        build(commit_id)
                if sentinel is not None:
                    sentinel.parent.mkdir(parents=True, exist_ok=True)
                    sentinel.write_text("")
            with self._lock:
                self.built.add(commit_id)
                self.builds_performed += 1
        except BuildFailure as exc:
            with self._lock:
                self._failures[commit_id] = exc
            raise
        except Exception as exc:
            failure = BuildFailure(commit_id, str(exc))
            with self._lock:
                self._failures[commit_id] = failure
            raise failure from exc
        finally:
            with self._lock:
                self.in_flight.pop(commit_id, None)
            event.set()


class Oracle:
    """Base oracle; subclasses implement :meth:`_build` and :meth:`_test`."""

    def __init__(self, history: CommitHistory, cache: Optional[BuildCache] = None):
        self.history = history
        self.cache = cache if cache is not None else BuildCache()
        self.queries_by_program: Counter[str] = Counter()
        self._counter_lock = threading.Lock()

    def _build(self, commit_id: str) -> None:
        pass

    def _test(self, query: OracleQuery) -> OracleVerdict:
        raise NotImplementedError

    def evaluate(self, query: OracleQuery) -> OracleVerdict:
        if query.commit_id not in self.history:
            raise UnknownEntity(f"commit {query.commit_id!r} is not in the active history")
        self.cache.ensure(query.commit_id, self._build)
        with self._counter_lock:
            self.queries_by_program[query.program_id] += 1
        return self._test(query)

    def check(self, program_id: str, commit_id: str, config: OptConfig) -> Verdict:
        return self.evaluate(OracleQuery(program_id, commit_id, config)).outcome

    @property
    def total_queries(self) -> int:
        return sum(self.queries_by_program.values())

    def build_stats(self) -> tuple[int, float]:
        """``(distinct versions built, versions per distinct program seen)``."""
        programs = len(self.queries_by_program)
        if programs == 0:
            raise ValueError("build_stats requires at least one evaluation")
        built = len(self.cache.built)
        return built, built / programs


# --------------------------------------------------------------------------
# external commands


def render_flags(config: OptConfig, style="gcc") -> str:
    """Render ``config`` as compiler flags.

    ``style`` is ``"gcc"`` (``-O2 -fno-foo``) or a mapping with ``level`` and
    ``disable`` format strings, e.g. ``{"level": "-{level}", "disable": "-fno-{pass}"}``.
    """
    if style in (None, "gcc", "llvm"):
        style = {"level": "-{level}", "disable": "-fno-{pass}"}
    if not isinstance(style, Mapping):
        raise ValueError(f"unknown flag style {style!r}")
    parts = [style["level"].format(level=config.level)]
    parts += [style["disable"].format(**{"pass": p}) for p in sorted(config.disabled)]
    return " ".join(parts)


@dataclass
class AdapterConfig:
    checkout_build_cmd: str
    test_cmd: str
    flag_style: object = "gcc"
    timeout_secs: float = DEFAULT_TIMEOUT_SECS
    parallelism: Optional[int] = None
    cache_dir: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, data: Mapping) -> "AdapterConfig":
        known = {"checkout_build_cmd", "test_cmd", "flag_style", "timeout_secs", "parallelism", "cache_dir"}
        missing = {"checkout_build_cmd", "test_cmd"} - set(data)
        if missing:
            raise ValueError(f"adapter config missing {sorted(missing)}")
        cfg = cls(**{k: v for k, v in data.items() if k in known})
        cfg.extra = {k: v for k, v in data.items() if k not in known}
        env_dir = os.environ.get("BUGLENS_CACHE_DIR")
        if env_dir:
            cfg.cache_dir = env_dir
        return cfg

    @classmethod
    def load(cls, path) -> "AdapterConfig":
        return cls.from_json(read_json(path))


def _run(cmd: str, timeout: float, cwd=None) -> subprocess.CompletedProcess:
    return subprocess.run(
        cmd,
        shell=True,
        capture_output=True,
        text=True,
        timeout=timeout,
        cwd=cwd,
    )


def _tail(proc: subprocess.CompletedProcess, limit=2000) -> str:
    text = (proc.stdout or "") + (proc.stderr or "")
    return text[-limit:]


class ExternalOracle(Oracle):
    """Oracle driven by user-supplied shell commands.

    The build command receives ``{commit}`` and ``{build_dir}``; the test
    command additionally receives ``{program}`` and ``{flags}``. Test exit
    codes follow the bisect-script convention: 0 pass, 1 fail, 125 skip.
    """

    def __init__(
        self,
        history: CommitHistory,
        programs: Sequence[TestProgram],
        config: AdapterConfig,
        cache: Optional[BuildCache] = None,
    ):
        if cache is None:
            cache = BuildCache(config.parallelism, config.cache_dir)
        super().__init__(history, cache)
        self.config = config
        self.programs = {p.id: p for p in programs}

    def _fields(self, commit_id: str) -> dict:
        build_dir = self.cache.build_dir(commit_id)
        return {
            "commit": shlex.quote(commit_id),
            "build_dir": shlex.quote(str(build_dir)) if build_dir is not None else "",
        }

    def _build(self, commit_id: str) -> None:
        cmd = self.config.checkout_build_cmd.format(**self._fields(commit_id))
        log.info("building %s", commit_id)
        try:
            proc = _run(cmd, self.config.timeout_secs)
        except subprocess.TimeoutExpired:
            raise BuildFailure(commit_id, f"build timed out after {self.config.timeout_secs}s")
        if proc.returncode != 0:
            raise BuildFailure(commit_id, f"exit {proc.returncode}: {_tail(proc)}")

    def _test(self, query: OracleQuery) -> OracleVerdict:
        try:
            program = self.programs[query.program_id]
        except KeyError:
            raise UnknownEntity(f"unknown program {query.program_id!r}") from None
        fields = self._fields(query.commit_id)
        fields["program"] = shlex.quote(program.source_ref)
        flags = render_flags(query.config, self.config.flag_style)
        fields["flags"] = " ".join(shlex.quote(f) for f in flags.split())
        cmd = self.config.test_cmd.format(**fields)
        try:
            proc = _run(cmd, self.config.timeout_secs)
        except subprocess.TimeoutExpired:
            return OracleVerdict(Verdict.INDETERMINATE, "timeout")
        detail = _tail(proc)
        if proc.returncode == 0:
            return OracleVerdict(Verdict.PASS, detail)
        if proc.returncode == 1:
            return OracleVerdict(Verdict.FAIL, detail)
        if proc.returncode == 125:
            return OracleVerdict(Verdict.INDETERMINATE, detail)
        raise BuildFailure(query.commit_id, f"test command exit {proc.returncode}: {detail}")
