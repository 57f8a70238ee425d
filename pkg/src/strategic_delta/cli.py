"""
Command-line interface.

Usage:
    strategic-delta solve --game pbeauty --p 0.6667 --benchmark level-k --k 2
    strategic-delta simulate --design design.json --dataset runs.csv --out simulate.json
    strategic-delta analyze --dataset runs.csv --out profile.json
    strategic-delta moderator --dataset runs.csv --ordering dictator,ultimatum,trust
    strategic-delta llm-run --design design.json --endpoint endpoint.json --dataset llm.csv
    strategic-delta report --input profile.json --tables-dir figures/
    strategic-delta evidence
    strategic-delta certify --generate 7 --shape 3x3

Every command prints a short summary on standard output and, with ``--out``,
writes its result as JSON. Usage errors exit with status 2, data and
convergence errors with status 1.
"""

import argparse
import json
import logging
import math
import sys
from enum import Enum
from pathlib import Path

import numpy as np

from . import (
    DEFAULT_BOOTSTRAP,
    DEFAULT_GRID_POINTS,
    DEFAULT_PERMUTATIONS,
    DEFAULT_SEED,
    LOG,
    SCHEMA_VERSION,
    __version__,
)
from .agents import load_design, run_experiment
from .baselines import Benchmark, baseline_to_dict, select_baseline
from .dataset import evidence_summary, load_dataset, render_report, write_dataset
from .exceptions import InvalidParams, StrategicDeltaError, UsageError
from .game_model import (
    canonical_games,
    emit_certification_checklist,
    generate_novel_game,
    load_games,
    make_game,
)
from .llm_adapter import TranscriptStore, load_endpoint_config, run_llm_design
from .moderator import (
    individuation_gradient_test,
    power_n_per_arm,
    report_to_dict,
    report_to_markdown,
)
from .residuals import (
    DEFAULT_BLOCK_SIZE,
    Pooling,
    deltas_to_frame,
    delta_series,
    drop_incomplete_sessions,
    standardize_deltas,
    write_delta_csv,
)
from .signatures import (
    DEFAULT_SHUFFLES,
    BatterySettings,
    profile_to_dict,
    profile_to_markdown,
    run_battery,
)
from .utils import config_hash, load_config

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# settings resolved from flags, then --config, then these defaults
DEFAULTS = {
    "seed": DEFAULT_SEED,
    "permutations": DEFAULT_PERMUTATIONS,
    "bootstrap": DEFAULT_BOOTSTRAP,
    "grid_points": DEFAULT_GRID_POINTS,
    "block_size": DEFAULT_BLOCK_SIZE,
    "pooling": Pooling.PER_GAME.value,
    "shuffles": DEFAULT_SHUFFLES,
    "workers": 1,
    "benchmark": "nash",
    "k": None,
    "tau": None,
    "lam": None,
}


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (set, tuple)):
        return list(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _finite(value):
    """Replace non-finite floats with None so the output is strict JSON."""
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, (float, np.floating)) and not math.isfinite(value):
        return None
    return value


def dump_json(document) -> str:
    """Deterministic JSON text: sorted keys, fixed indent, trailing newline."""
    return json.dumps(_finite(document), sort_keys=True, indent=2, default=_json_default) + "\n"


def _settings(args):
    config = load_config(args.config) if args.config else {}
    unknown = set(config) - set(DEFAULTS)
    if unknown:
        raise InvalidParams(f"Unknown config keys: {', '.join(sorted(unknown))}")
    out = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else config.get(key, default)
    return out


def _benchmark(settings):
    return Benchmark.parse(settings["benchmark"], settings["k"], settings["tau"], settings["lam"])


def _baselines(games, settings):
    """Baselines for every acting role; roles the benchmark cannot handle are skipped."""
    benchmark = _benchmark(settings)
    out = {}
    for game in games.values():
        for role in game.acting_roles:
            try:
                out[(game.id, role)] = select_baseline(game, role, benchmark, settings["grid_points"])
            except StrategicDeltaError as e:
                LOG.warning("No %s baseline for %s role %d: %s", benchmark, game.id, role, e)
    return out


def _covered(records, baselines):
    kept = [r for r in records if (r.game_id, r.role) in baselines]
    if len(kept) < len(records):
        LOG.warning("Ignoring %d records without a baseline", len(records) - len(kept))
    return kept


def _parse_params(pairs):
    params = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise InvalidParams(f"--param expects KEY=VALUE, got {pair!r}")
        try:
            params[key] = float(value)
        except ValueError:
            params[key] = value
    return params


def _parse_shape(text):
    try:
        rows, cols = (int(d) for d in text.lower().split("x"))
    except ValueError as e:
        raise InvalidParams(f"--shape expects RxC, got {text!r}") from e
    return rows, cols


def _resolve_game(args):
    if args.generate is not None:
        return generate_novel_game(args.generate, _parse_shape(args.shape))
    catalogue = canonical_games()
    if args.games_file:
        catalogue.update(load_games(args.games_file))
    if not args.game:
        raise InvalidParams("Name a game with --game or --generate")
    overrides = _parse_params(args.param)
    if getattr(args, "p", None) is not None:
        overrides["p"] = args.p
    if args.game in catalogue:
        base = catalogue[args.game]
        if not overrides and args.players is None:
            return base
        return make_game(
            base.family,
            {**base.params, **overrides},
            base.id,
            base.rounds,
            args.players or base.n_players,
            base.name,
        )
    return make_game(args.game, overrides, n_players=args.players)


def cmd_solve(args, settings):
    game = _resolve_game(args)
    benchmark = _benchmark(settings)
    roles = [args.role] if args.role is not None else list(game.acting_roles)
    baselines = []
    for role in roles:
        try:
            baselines.append(select_baseline(game, role, benchmark, settings["grid_points"]))
        except StrategicDeltaError as e:
            if args.role is not None or len(roles) == 1:
                raise
            LOG.warning("Role %d skipped: %s", role, e)
    if not baselines:
        raise InvalidParams(f"{benchmark} gives no baseline for any role of {game.id}")
    for b in baselines:
        value = b.point if b.point is not None else (b.mean() if b.numeric else dict(zip(b.support, b.weights)))
        shown = f"{value:.4g}" if isinstance(value, float) else value
        print(f"{game.id} role {b.role} {b.benchmark}: {shown}")
    return {"game_id": game.id, "benchmark": str(benchmark), "baselines": [baseline_to_dict(b) for b in baselines]}


def _load_run_design(args, settings):
    """Load the design of a simulate or llm-run command and settle the run seed."""
    design = load_design(args.design)
    if args.seed is not None:
        design.seed = args.seed
    settings["seed"] = design.seed
    return design


def cmd_simulate(args, settings):
    design = args.run_design
    dataset = run_experiment(design)
    write_dataset(args.dataset, dataset)
    print(f"Simulated {len(dataset)} decisions into {args.dataset}")
    return {
        "dataset": str(args.dataset),
        "records": len(dataset),
        "games": sorted(dataset.games),
        "sessions": len({r.session_id for r in dataset.records}),
    }


def cmd_analyze(args, settings):
    dataset = load_dataset(args.dataset, lenient=args.lenient)
    baselines = _baselines(dataset.games, settings)
    records = _covered(dataset.records, baselines)
    battery = BatterySettings(
        n_permutations=settings["permutations"],
        n_bootstrap=settings["bootstrap"],
        seed=settings["seed"],
        block_size=settings["block_size"],
        pooling=Pooling(settings["pooling"]),
        n_shuffles=settings["shuffles"],
        workers=settings["workers"],
    )
    if args.deltas:
        kept, _ = drop_incomplete_sessions(records, dataset.games)
        write_delta_csv(args.deltas, delta_series(kept, dataset.games, baselines, battery.block_size))
    profile = run_battery(records, dataset.games, baselines, battery)
    print(profile_to_markdown(profile), end="")
    result = profile_to_dict(profile)
    result["dropped_rows"] = len(dataset.errors)
    return result


def cmd_moderator(args, settings):
    result = {}
    if args.dataset:
        dataset = load_dataset(args.dataset, lenient=args.lenient)
        baselines = _baselines(dataset.games, settings)
        records, _ = drop_incomplete_sessions(_covered(dataset.records, baselines), dataset.games)
        series = delta_series(records, dataset.games, baselines, settings["block_size"])
        frame = deltas_to_frame(standardize_deltas(series, Pooling(settings["pooling"])))
        ordering = args.ordering.split(",") if args.ordering else None
        report = individuation_gradient_test(frame, ordering, settings["bootstrap"], settings["seed"])
        print(report_to_markdown(report), end="")
        result.update(report_to_dict(report))
    if args.power_d is not None:
        n = power_n_per_arm(args.power_d, args.alpha, args.power, seed=settings["seed"])
        print(f"n per arm for d={args.power_d:g}, alpha={args.alpha:g}, power={args.power:g}: {n}")
        result["power"] = {"d": args.power_d, "alpha": args.alpha, "power": args.power, "n_per_arm": n}
    if not result:
        raise InvalidParams("moderator needs --dataset or --power-d")
    return result


def cmd_llm_run(args, settings):
    design = args.run_design
    endpoint = load_endpoint_config(args.endpoint, mode=args.mode, transcript_path=args.transcripts)
    store = TranscriptStore(endpoint.transcript_path) if endpoint.transcript_path else None
    dataset = run_llm_design(design, endpoint, store)
    write_dataset(args.dataset, dataset)
    print(f"Collected {len(dataset)} decisions from {endpoint.model} ({endpoint.mode.value})")
    return {
        "dataset": str(args.dataset),
        "model": endpoint.model,
        "mode": endpoint.mode.value,
        "records": len(dataset),
        "excluded": dataset.excluded,
    }


def cmd_report(args, settings):
    with open(args.input, encoding="utf8") as fp:
        document = json.load(fp)
    markdown, tables = render_report(document)
    if args.markdown:
        Path(args.markdown).write_text(markdown, encoding="utf8")
    else:
        print(markdown, end="")
    written = []
    if args.tables_dir:
        directory = Path(args.tables_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for name, frame in sorted(tables.items()):
            path = directory / f"{name}.csv"
            frame.to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
            written.append(str(path))
    return {"input": str(args.input), "tables": written}


def cmd_evidence(args, settings):
    summary = evidence_summary(args.fixture)
    for row in summary["rows"]:
        if row["diff"] is not None:
            print(
                f"{row['study']} ({row['family']}, {row['statistic']}): "
                f"llm {row['llm']:g} vs human {row['human']:g}, diff {row['diff']:+g}"
            )
    print(f"{summary['quantified']} quantified, {summary['direction_only']} direction-only rows")
    return summary


def cmd_certify(args, settings):
    game = _resolve_game(args)
    checklist = emit_certification_checklist(game)
    print(f"Certification checklist for {game.id} ({game.name}), payoff hash {checklist['payoff_hash'][:12]}")
    return checklist


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"Master seed (default {DEFAULT_SEED})")
    common.add_argument("--out", default=None, help="Write the JSON result to this path")
    common.add_argument("--config", default=None, help="JSON (or YAML) file with default settings")
    common.add_argument(
        "--permutations", type=int, default=None, help=f"Permutation count (default {DEFAULT_PERMUTATIONS})"
    )
    common.add_argument(
        "--bootstrap", type=int, default=None, help=f"Bootstrap replicates (default {DEFAULT_BOOTSTRAP})"
    )
    common.add_argument(
        "--grid-points", type=int, default=None, help=f"Action grid size (default {DEFAULT_GRID_POINTS})"
    )
    common.add_argument("--lenient", action="store_true", help="Drop malformed dataset rows instead of failing")
    common.add_argument("--workers", type=int, default=None, help="Threads for resampling loops (default 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    return common


def _add_benchmark(parser):
    parser.add_argument("--benchmark", default=None, help="nash, spe, level-k, ch or qre (default nash)")
    parser.add_argument("--k", type=int, default=None, help="Level for level-k and ch")
    parser.add_argument("--tau", type=float, default=None, help="Poisson mean for ch (default 1.5)")
    parser.add_argument("--lam", type=float, default=None, help="Logit precision for qre")


def _add_game(parser):
    parser.add_argument("--game", help="Canonical game id or family name")
    parser.add_argument("--games-file", help="Sidecar game file with extra games")
    parser.add_argument("--param", action="append", help="Game parameter override KEY=VALUE")
    parser.add_argument("--players", type=int, default=None, help="Player count")
    parser.add_argument("--generate", type=int, default=None, help="Generate a novel bimatrix game from this seed")
    parser.add_argument("--shape", default="3x3", help="Shape of the generated game, RxC (default 3x3)")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="strategic-delta",
        description="Behavioural residuals against game-theoretic baselines",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", parents=[common], help="Print baselines for a game")
    _add_game(solve)
    _add_benchmark(solve)
    solve.add_argument("--p", type=float, default=None, help="Beauty-contest multiplier")
    solve.add_argument("--role", type=int, default=None, help="Only this role")
    solve.set_defaults(func=cmd_solve)

    simulate = sub.add_parser("simulate", parents=[common], help="Run an experiment design")
    simulate.add_argument("--design", required=True, help="Experiment design file")
    simulate.add_argument("--dataset", required=True, help="Dataset CSV to write")
    simulate.set_defaults(func=cmd_simulate)

    analyze = sub.add_parser("analyze", parents=[common], help="Run the signature battery on a dataset")
    analyze.add_argument("--dataset", required=True, help="Dataset CSV")
    analyze.add_argument("--deltas", default=None, help="Also write the residual table here")
    analyze.add_argument("--block-size", type=int, default=None, help="Rounds per block for binary games")
    analyze.add_argument("--pooling", choices=[p.value for p in Pooling], default=None)
    analyze.add_argument("--shuffles", type=int, default=None, help="Shuffles for path dependence")
    _add_benchmark(analyze)
    analyze.set_defaults(func=cmd_analyze)

    moderator = sub.add_parser("moderator", parents=[common], help="Run the individuation gradient test")
    moderator.add_argument("--dataset", default=None, help="Dataset CSV")
    moderator.add_argument("--ordering", default=None, help="Comma-separated game ids, least individuated first")
    moderator.add_argument("--block-size", type=int, default=None)
    moderator.add_argument("--pooling", choices=[p.value for p in Pooling], default=None)
    moderator.add_argument("--power-d", type=float, default=None, help="Also size a study for this d")
    moderator.add_argument("--alpha", type=float, default=0.05)
    moderator.add_argument("--power", type=float, default=0.8)
    _add_benchmark(moderator)
    moderator.set_defaults(func=cmd_moderator)

    llm = sub.add_parser("llm-run", parents=[common], help="Run a design against a model endpoint")
    llm.add_argument("--design", required=True, help="Experiment design file")
    llm.add_argument("--endpoint", required=True, help="Endpoint config file; the token comes from its token_env")
    llm.add_argument("--mode", choices=["Live", "Record", "Replay"], default=None)
    llm.add_argument("--transcripts", default=None, help="Transcript store (JSON lines)")
    llm.add_argument("--dataset", required=True, help="Dataset CSV to write")
    llm.set_defaults(func=cmd_llm_run)

    report = sub.add_parser("report", parents=[common], help="Render a JSON result as Markdown and CSV tables")
    report.add_argument("--input", required=True, help="JSON result written with --out")
    report.add_argument("--markdown", default=None, help="Markdown output path (default stdout)")
    report.add_argument("--tables-dir", default=None, help="Directory for plot-ready CSV tables")
    report.set_defaults(func=cmd_report)

    evidence = sub.add_parser("evidence", parents=[common], help="Summarize the LLM-vs-human evidence table")
    evidence.add_argument("--fixture", default=None, help="Evidence CSV (default: bundled)")
    evidence.set_defaults(func=cmd_evidence)

    certify = sub.add_parser("certify", parents=[common], help="Emit a certification checklist")
    _add_game(certify)
    certify.set_defaults(func=cmd_certify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format=LOG_FORMAT,
    )
    try:
        settings = _settings(args)
        if getattr(args, "design", None):
            args.run_design = _load_run_design(args, settings)
        digest = config_hash({"command": args.command, **settings, **_inputs(args)})
        LOG.info("Running %s with seed %d, config hash %s", args.command, settings["seed"], digest)
        result = args.func(args, settings)
        document = {
            "schema_version": SCHEMA_VERSION,
            "command": args.command,
            "seed": settings["seed"],
            "config_hash": digest,
            "result": result,
        }
        if args.out:
            Path(args.out).write_text(dump_json(document), encoding="utf8")
            LOG.info("Wrote %s", args.out)
    except UsageError as e:
        print(f"{e.__class__.__name__}: {e}", file=sys.stderr)
        return 2
    except (StrategicDeltaError, OSError) as e:
        print(f"{e.__class__.__name__}: {e}", file=sys.stderr)
        return 1
    return 0


def _inputs(args):
    """Command arguments that shape the result, for the config hash."""
    skip = {"func", "out", "config", "verbose", "command", "run_design", *DEFAULTS}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


if __name__ == "__main__":
    sys.exit(main())
