"""Command-line entry point: ``buglens <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 oracle or build failure, 1 other errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from buglens import pipeline
from buglens.errors import BugLensError, InfeasibleParams, OracleError, ValidationError
from buglens.model import (
    BisectionOutcome,
    Fingerprint,
    PassUniverse,
    RankedList,
    load_history,
    load_programs,
    load_universe,
    read_json,
    universe_from_vectors,
    validate_dataset,
    write_json_atomic,
    write_text_atomic,
)
from buglens.oracle import AdapterConfig, ExternalOracle
from buglens.ranking import MODES
from buglens.sim import PRESETS, BugSpec, NoiseSpec, SimOracle, World, WorldParams, generate_world, preset

log = logging.getLogger("buglens")

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_ORACLE = 0, 1, 2, 3


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING - 10 * verbose
    logging.basicConfig(
        level=max(level, logging.DEBUG),
        stream=sys.stderr,
        format='ts=%(asctime)s level=%(levelname)s logger=%(name)s msg="%(message)s"',
    )


def _load(path, loader):
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"{p}: no such file")
    try:
        return loader(p)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{p}: malformed ({exc})") from exc


def _dataset(history_path, programs_path, passes_path=None):
    history = _load(history_path, load_history)
    programs = _load(programs_path, load_programs)
    universe = _load(passes_path, load_universe) if passes_path else None
    problems = validate_dataset(history, programs, universe)
    if problems:
        raise ValidationError("invalid dataset:\n  " + "\n  ".join(map(str, problems)))
    return history, programs, universe


def _oracle(spec: str, history, programs, programs_path, parallelism):
    """``sim`` (truth.json next to programs), ``sim:TRUTH`` or ``extern:ADAPTER``."""
    kind, _, arg = spec.partition(":")
    if kind == "sim":
        truth_path = Path(arg) if arg else Path(programs_path).parent / "truth.json"
        truth = _load(truth_path, read_json)
        try:
            bugs = tuple(BugSpec.from_json(b) for b in truth["bugs"])
            noise = NoiseSpec.from_json(truth.get("noise", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{truth_path}: malformed ({exc})") from exc
        return SimOracle(World(history, PassUniverse(()), tuple(programs), bugs, noise))
    if kind == "extern":
        if not arg:
            raise ValidationError("extern oracle needs an adapter config: extern:adapter.json")
        config = _load(arg, AdapterConfig.load)
        if config.parallelism is None:
            config.parallelism = parallelism
        return ExternalOracle(history, programs, config)
    raise ValidationError(f"unknown oracle {spec!r}; use sim, sim:TRUTH or extern:ADAPTER")


def _builds_json(oracle) -> dict:
    built, per_case = oracle.build_stats()
    return {
        "distinct_versions_built": built,
        "versions_per_case": per_case,
        "queries_by_program": dict(sorted(oracle.queries_by_program.items())),
    }


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    if args.preset:
        params = preset(args.preset, args.seed if args.seed is not None else 0)
    elif args.params:
        data = _load(args.params, read_json)
        if args.seed is not None:
            data = {**data, "seed": args.seed}
        params = WorldParams.from_json(data)
    else:
        params = WorldParams(seed=args.seed or 0)
    world = generate_world(params)
    world.write(args.out_dir)
    log.info("wrote world with %d programs to %s", len(world.programs), args.out_dir)
    return EXIT_OK


def cmd_bisect(args) -> int:
    history, programs, _ = _dataset(args.history, args.programs)
    oracle = _oracle(args.oracle, history, programs, args.programs, args.parallelism)
    located = pipeline.locate_all(programs, history, oracle, args.parallelism, check=not args.no_verify)
    out = Path(args.out)
    write_json_atomic(out, [o.to_json() for o in located.outcomes])
    write_json_atomic(out.with_name(out.stem + ".unresolved.json"), located.unresolved)
    if located.outcomes or located.unresolved:
        write_json_atomic(out.with_name("builds.json"), _builds_json(oracle))
    return EXIT_OK


def cmd_minimize(args) -> int:
    base = Path(args.passes).parent
    history, programs, universe = _dataset(
        args.history or base / "history.json", args.programs or base / "programs.json", args.passes
    )
    outcomes = _load(args.outcomes, lambda p: [BisectionOutcome.from_json(d) for d in read_json(p)])
    oracle = _oracle(args.oracle, history, programs, args.programs or base / "programs.json", args.parallelism)
    fps, failed, uncertified = pipeline.fingerprint_all(
        outcomes, programs, history, universe, oracle, args.parallelism, args.at
    )
    for pid in uncertified:
        log.warning("%s: pass set not certified 1-minimal", pid)
    for pid, why in failed.items():
        log.warning("%s: %s", pid, why)
    write_json_atomic(args.out, [f.to_json(universe) for f in fps])
    return EXIT_OK


def _load_fingerprints(path, passes=None):
    records = _load(path, read_json)
    universe = _load(passes, load_universe) if passes else universe_from_vectors(r["vector"] for r in records)
    try:
        return [Fingerprint.from_json(r, universe) for r in records]
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed fingerprint ({exc})") from exc


def cmd_rank(args) -> int:
    fps = _load_fingerprints(args.fingerprints, args.passes)
    if not fps:
        raise ValidationError(f"{args.fingerprints}: no fingerprints to rank")
    seeds = [args.seed] if args.repetitions == 1 else pipeline.derive_seeds(args.seed, args.repetitions)
    name = pipeline.MODE_NAMES[args.mode]
    orders = pipeline.rank_all(fps, seeds, [name])[name]
    write_json_atomic(args.out, _ranking_json(name, orders))
    return EXIT_OK


def _ranking_json(name, orders) -> dict:
    return {"ranker": name, "rankings": [o.to_json() for o in orders]}


def _truth(programs_path) -> dict[str, str]:
    programs = _load(programs_path, load_programs)
    truth = {p.id: p.ground_truth_bug for p in programs if p.ground_truth_bug is not None}
    if not truth:
        raise ValidationError(f"{programs_path}: no ground_truth_bug labels")
    return truth


def cmd_evaluate(args) -> int:
    rankings = {}
    files = sorted(Path(args.rankings).glob("*.json")) if Path(args.rankings).is_dir() else []
    if not files:
        raise ValidationError(f"{args.rankings}: no ranking files")
    for f in files:
        data = _load(f, read_json)
        rankings[data["ranker"]] = [RankedList.from_json(r) for r in data["rankings"]]
    truth = _truth(args.truth)
    stats = None
    if args.build_stats:
        b = _load(args.build_stats, read_json)
        stats = (b["distinct_versions_built"], b["versions_per_case"])
    report, reports = pipeline.build_report(rankings, truth, stats)
    write_json_atomic(args.out, report)
    if args.csv:
        write_text_atomic(args.csv, pipeline.curves_csv(reports))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    out = Path(args.out_dir)
    if args.sim_preset or args.sim_params:
        if args.sim_preset:
            params = preset(args.sim_preset, args.seed)
        else:
            params = WorldParams.from_json({**_load(args.sim_params, read_json), "seed": args.seed})
        world = generate_world(params)
        world.write(out / "world")
        history, programs, universe = world.history, list(world.programs), world.universe
        oracle = SimOracle(world)
    else:
        if not (args.history and args.programs and args.passes and args.oracle):
            raise ValidationError("pipeline needs --sim-preset/--sim-params or --history, --programs, --passes and --oracle")
        history, programs, universe = _dataset(args.history, args.programs, args.passes)
        oracle = _oracle(args.oracle, history, programs, args.programs, args.parallelism)

    located = pipeline.locate_all(programs, history, oracle, args.parallelism)
    write_json_atomic(out / "outcomes.json", [o.to_json() for o in located.outcomes])
    write_json_atomic(out / "outcomes.unresolved.json", located.unresolved)
    bisect_queries = oracle.total_queries

    fps, failed, uncertified = pipeline.fingerprint_all(
        located.outcomes, programs, history, universe, oracle, args.parallelism, args.at
    )
    write_json_atomic(out / "fingerprints.json", [f.to_json(universe) for f in fps])
    if not fps:
        raise ValidationError("no program could be fingerprinted")
    builds = _builds_json(oracle)
    builds["bisection_queries"] = bisect_queries
    write_json_atomic(out / "builds.json", builds)

    seeds = pipeline.derive_seeds(args.seed, args.repetitions)
    rankings = pipeline.rank_all(fps, seeds)
    for name, orders in rankings.items():
        write_json_atomic(out / "rankings" / f"{name}.json", _ranking_json(name, orders))

    ranked = {f.program_id for f in fps}
    truth = {p.id: p.ground_truth_bug for p in programs if p.id in ranked}
    if any(v is None for v in truth.values()):
        log.info("programs carry no ground truth; skipping evaluation")
        return EXIT_OK
    dataset = {
        "programs": len(programs),
        "ranked": len(fps),
        "bugs": len(set(truth.values())),
        "unresolved": located.unresolved,
        "not_minimized": failed,
        "unverified": located.unverified,
        "uncertified": uncertified,
    }
    report, reports = pipeline.build_report(
        rankings, truth, (builds["distinct_versions_built"], builds["versions_per_case"]), dataset
    )
    write_json_atomic(out / "report.json", report)
    write_text_atomic(out / "curves.csv", pipeline.curves_csv(reports))
    for name, r in reports.items():
        log.info("%s: mean effort to find all %d bugs = %.2f", name, r.total_bugs, r.wasted_effort[r.total_bugs])
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="buglens", description=__doc__.splitlines()[0])
    verbosity = argparse.ArgumentParser(add_help=False)
    verbosity.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    class _Sub:
        def add_parser(self, name, **kw):
            return subparsers.add_parser(name, parents=[verbosity], **kw)

    sub = _Sub()

    def common(p, oracle=True):
        p.add_argument("--parallelism", type=int, default=pipeline.default_parallelism())
        if oracle:
            p.add_argument("--oracle", required=True, help="sim | sim:TRUTH.json | extern:ADAPTER.json")

    p = sub.add_parser("simulate", help="generate a synthetic world")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--params", help="world parameter JSON")
    g.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bisect", help="locate failure-inducing commits")
    p.add_argument("--history", required=True)
    p.add_argument("--programs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-verify", action="store_true")
    common(p)
    p.set_defaults(func=cmd_bisect)

    p = sub.add_parser("minimize-opts", help="minimise bug-triggering optimisation passes")
    p.add_argument("--outcomes", required=True)
    p.add_argument("--passes", required=True)
    p.add_argument("--history", help="default: history.json next to --passes")
    p.add_argument("--programs", help="default: programs.json next to --passes")
    p.add_argument("--at", choices=("inducing", "bad"), default="inducing")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("rank", help="furthest-point-first ranking")
    p.add_argument("--fingerprints", required=True)
    p.add_argument("--mode", choices=MODES, default="combined")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--passes", help="pass universe (default: inferred from vectors)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("evaluate", help="score rankings against ground truth")
    p.add_argument("--rankings", required=True, help="directory of ranking JSON files")
    p.add_argument("--truth", required=True, help="programs.json with ground_truth_bug labels")
    p.add_argument("--build-stats", help="builds.json written by bisect")
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="simulate/bisect/minimise/rank/evaluate in one go")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--sim-preset", choices=sorted(PRESETS))
    src.add_argument("--sim-params")
    p.add_argument("--history")
    p.add_argument("--programs")
    p.add_argument("--passes")
    p.add_argument("--oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetitions", type=int, default=pipeline.DEFAULT_REPETITIONS)
    p.add_argument("--at", choices=("inducing", "bad"), default="inducing")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--parallelism", type=int, default=pipeline.default_parallelism())
    p.set_defaults(func=cmd_pipeline)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except (ValidationError, InfeasibleParams) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except OracleError as exc:
        log.error("oracle failure: %s", exc)
        return EXIT_ORACLE
    except BugLensError as exc:
        log.error("%s", exc)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
