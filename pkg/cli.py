"""
Command-line entry point: theory values, simulations, the twelve-row comparison table and sweeps.
"""

__version__ = "0.1.0"

import argparse
import csv
import io
import logging
import os
import sys
from collections.abc import Sequence

from dotenv import load_dotenv
from tqdm import tqdm

from engine import InitPolicy, SEED_MASK
from errors import InvalidInputError, RoyalRoadError
from experiments import (
    CI_METHOD,
    CensoringPolicy,
    ExperimentOutcome,
    ExperimentRow,
    ExperimentSpec,
    REPLICATE_HEADER,
    SUMMARY_HEADER,
    ReplicateRecord,
    check_published_theory,
    format_real,
    run_experiment,
    summary_fields,
    published_grid,
    write_replicates_csv,
    write_summary_csv,
)
from grid_file import load_grid
from royal_road import RoyalRoadLayout
from theory import ModelParams, TheoryReport, theory_report

load_dotenv()

# Environment variables
env_seed = os.getenv("RR_EA_SEED", "0")
env_workers = os.getenv("RR_EA_WORKERS", str(os.cpu_count() or 1))
env_runs = os.getenv("RR_EA_RUNS", "400")
env_generations = os.getenv("RR_EA_GENERATIONS", "2000")
env_logging_level = os.getenv("LOGGING_LEVEL", "INFO").upper()

logger = logging.getLogger(__name__)

THEORY_HEADER = ("n", "K", "M", "mu", "lambda", "exact", "approx", "asymptotic_scale", "mu_equals_lambda")
UNAVAILABLE = "unavailable"

_log_handler: logging.Handler | None = None


def _configure_logging() -> None:
    """Send log records to stderr; stdout carries data only."""
    global _log_handler
    root = logging.getLogger()
    if _log_handler is None:
        _log_handler = logging.StreamHandler(sys.stderr)
        root.addHandler(_log_handler)
    root.setLevel(env_logging_level)


def _in_range(name: str, value: int, minimum: int, maximum: int | None = None) -> int:
    if value < minimum or (maximum is not None and value > maximum):
        raise InvalidInputError(f"{name} is out of range: {value}")
    return value


def _env_int(name: str, raw: str, minimum: int, maximum: int | None = None) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise InvalidInputError(f"{name} must be an integer, got {raw!r}") from None
    return _in_range(name, value, minimum, maximum)


def _setting(flag: int | None, flag_name: str, env_name: str, raw: str, minimum: int, maximum: int | None = None) -> int:
    if flag is None:
        return _env_int(env_name, raw, minimum, maximum)
    return _in_range(flag_name, flag, minimum, maximum)


def _resolve_defaults(args: argparse.Namespace) -> None:
    """Fill run flags left unset from the environment and range-check all of them."""
    if not hasattr(args, "workers"):
        return
    args.seed = _setting(args.seed, "--seed", "RR_EA_SEED", env_seed, 0, SEED_MASK)
    args.workers = _setting(args.workers, "--workers", "RR_EA_WORKERS", env_workers, 1)
    args.runs = _setting(args.runs, "--runs", "RR_EA_RUNS", env_runs, 1)
    args.gens = _setting(args.gens, "--gens", "RR_EA_GENERATIONS", env_generations, 1)


def _layout(n: int | None, k: int | None, m: int | None) -> RoyalRoadLayout:
    if n is None or m is None:
        raise InvalidInputError("--n and --m are required")
    if m < 2:
        raise InvalidInputError("M must be even and at least 2")
    return RoyalRoadLayout(n, k if k is not None else n // m, m)


def _row_from_args(args: argparse.Namespace) -> ExperimentRow:
    if args.mu is None:
        raise InvalidInputError("--mu is required")
    lam = args.lam if args.lam is not None else args.mu
    return ExperimentRow(_layout(args.n, args.k, args.m), args.mu, lam)


def render_pretty(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Right-aligned text table with one space-padded column per field."""
    widths = [len(title) for title in header]
    for row in rows:
        widths = [max(width, len(cell)) for width, cell in zip(widths, row)]
    lines = ["  ".join(cell.rjust(width) for cell, width in zip(line, widths)) for line in [list(header), *rows]]
    return "\n".join(lines) + "\n"


def _render(header: Sequence[str], rows: Sequence[Sequence[str]], output_format: str) -> str:
    if output_format == "pretty":
        return render_pretty(header, rows)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _emit(text: str, out: str | None) -> None:
    """Write rendered output to ``out``, or to stdout when no path is given."""
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, "w", newline="") as f:
        f.write(text)
    logger.info(f"Wrote {out}")


def _theory_fields(params: ModelParams, report: TheoryReport) -> list[str]:
    layout = params.layout
    return [
        str(layout.n),
        str(layout.K),
        str(layout.M),
        str(params.mu),
        str(params.lam),
        format_real(report.exact),
        format_real(report.approx) if report.approx_available else UNAVAILABLE,
        format_real(report.asymptotic_scale),
        "true" if report.mu_equals_lambda else "false",
    ]


def _log_clamps(params: ModelParams, report: TheoryReport) -> None:
    states = params.layout.K * (params.layout.M // 2)
    logger.info(
        f"Approximate failure probability clamped into [0, 1] at {report.clamp_events} of {states} level states "
        f"(n={params.layout.n} mu={params.mu} lambda={params.lam})"
    )


def cmd_theory(args: argparse.Namespace) -> int:
    params = _row_from_args(args).params
    report = theory_report(params)
    if report.approx_available:
        _log_clamps(params, report)
    else:
        logger.info("Approximate expectation is unavailable for mu < 2 or M < 4")
    _emit(_render(THEORY_HEADER, [_theory_fields(params, report)], args.format), args.out)
    return 0


def _progress_bar(total: int) -> tqdm:
    return tqdm(total=total, unit="run", file=sys.stderr, disable=not sys.stderr.isatty())


def cmd_simulate(args: argparse.Namespace) -> int:
    row = _row_from_args(args)
    spec = ExperimentSpec(
        rows=(row,),
        runs_per_row=args.runs,
        max_generations=args.gens,
        master_seed=args.seed,
        init_policy=InitPolicy(args.init),
    )
    with _progress_bar(args.runs) as bar:
        outcome = run_experiment(spec, workers=args.workers, progress=bar.update)

    if args.format == "pretty":
        text = render_pretty(REPLICATE_HEADER, [_replicate_fields(r) for r in outcome.replicates])
    else:
        buffer = io.StringIO()
        write_replicates_csv(outcome.replicates, buffer)
        text = buffer.getvalue()
    _emit(text, args.out)

    summary = outcome.summaries[0]
    line = (
        f"mean={format_real(summary.empirical_mean) or 'n/a'} std={format_real(summary.empirical_std) or 'n/a'} "
        f"ci95={format_real(summary.ci95_half_width) or 'n/a'} hits={summary.hits}/{summary.runs} "
        f"exact={format_real(summary.exact)} elites={format_real(summary.mean_elite_count) or 'n/a'} "
        f"ci=normal seed={args.seed}"
    )
    # stdout carries the CSV unless --out is given
    print(line, file=sys.stdout if args.out is not None else sys.stderr)
    return 0


def _replicate_fields(record: ReplicateRecord) -> list[str]:
    hit = "" if record.hit_generation is None else str(record.hit_generation)
    return [str(record.row_index), str(record.replicate), str(record.seed), hit]


def cmd_compare(args: argparse.Namespace) -> int:
    if args.grid is not None:
        rows = load_grid(args.grid)
        if not rows:
            raise InvalidInputError(f"grid file {args.grid} holds no valid rows")
    else:
        rows = published_grid()
        out_of_band = [check for check in check_published_theory() if not check.within_band]
        logger.info(f"Exact column checked against the published values: {len(out_of_band)} row(s) outside the band")

    spec = ExperimentSpec(
        rows=tuple(rows),
        runs_per_row=args.runs,
        max_generations=args.gens,
        master_seed=args.seed,
        init_policy=InitPolicy(args.init),
        censoring=CensoringPolicy(args.censoring),
    )
    with _progress_bar(len(rows) * args.runs) as bar:
        outcome = run_experiment(spec, workers=args.workers, progress=bar.update)

    logger.info(f"ci95 uses the {CI_METHOD}")
    if args.format == "pretty":
        text = render_pretty(SUMMARY_HEADER, [summary_fields(row, args.seed) for row in outcome.summaries])
        text += f"\nci95: {CI_METHOD}\ncensoring: {args.censoring}\n"
    else:
        buffer = io.StringIO()
        write_summary_csv(outcome.summaries, buffer, args.seed)
        text = buffer.getvalue()

    if args.raw_out is not None:
        _write_raw(outcome, args.raw_out)
    _emit(text, args.out)
    return 0


def _write_raw(outcome: ExperimentOutcome, path: str) -> None:
    with open(path, "w", newline="") as f:
        write_replicates_csv(outcome.replicates, f)
    logger.info(f"Wrote per-replicate results to {path}")


def _parse_values(raw: str) -> list[int]:
    try:
        values = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise InvalidInputError(f"--values must be comma-separated integers, got {raw!r}") from None
    if not values:
        raise InvalidInputError("sweep range is empty")
    return values


def _sweep_params(args: argparse.Namespace, value: int) -> ModelParams:
    match args.axis:
        case "mu":
            lam = args.lam if args.lam is not None else value
            return ModelParams(_layout(args.n, args.k, args.m), value, lam)
        case "lambda":
            if args.mu is None:
                raise InvalidInputError("--mu is required for a lambda sweep")
            return ModelParams(_layout(args.n, args.k, args.m), args.mu, value)
        case _:
            if args.mu is None:
                raise InvalidInputError("--mu is required for an n sweep")
            if args.m is None:
                raise InvalidInputError("--m is required for an n sweep")
            lam = args.lam if args.lam is not None else args.mu
            return ModelParams(_layout(value, None, args.m), args.mu, lam)


def cmd_sweep(args: argparse.Namespace) -> int:
    values = _parse_values(args.values)
    # Validate every point before any evaluation.
    points = [_sweep_params(args, value) for value in values]
    rows = []
    for params in points:
        report = theory_report(params)
        if report.clamp_events:
            _log_clamps(params, report)
        rows.append(_theory_fields(params, report))
    _emit(_render(THEORY_HEADER, rows, args.format), args.out)
    return 0


def _add_layout_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, help="Genome length")
    parser.add_argument("--k", type=int, help="Number of bins (default n / M)")
    parser.add_argument("--m", type=int, help="Bin size, even")
    parser.add_argument("--mu", type=int, help="Population size")
    parser.add_argument("--lambda", dest="lam", type=int, help="Offspring pool size, even (default mu)")


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="Output file (default stdout)")
    parser.add_argument("--format", choices=("csv", "pretty"), default="csv")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--runs", type=int, help="Replicates per row (default RR_EA_RUNS or 400)")
    parser.add_argument("--gens", type=int, help="Generation budget per run (default RR_EA_GENERATIONS or 2000)")
    parser.add_argument("--seed", type=int, help="Master seed (default RR_EA_SEED or 0)")
    parser.add_argument("--workers", type=int, help="Concurrent replicates (default RR_EA_WORKERS or CPU count)")
    parser.add_argument("--init", choices=[policy.value for policy in InitPolicy], default=InitPolicy.HALF_ONES.value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cli.py",
        description="Royal Roads (mu+lambda) EA with 1-Bit-Swap: hitting-time theory and experiments",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    theory = subparsers.add_parser("theory", help="Exact, approximate and asymptotic expected hitting time", allow_abbrev=False)
    _add_layout_flags(theory)
    _add_output_flags(theory)
    theory.set_defaults(handler=cmd_theory)

    simulate = subparsers.add_parser("simulate", help="Seeded replicates of one parameter set", allow_abbrev=False)
    _add_layout_flags(simulate)
    _add_run_flags(simulate)
    _add_output_flags(simulate)
    simulate.set_defaults(handler=cmd_simulate)

    compare = subparsers.add_parser("compare", help="Theory vs simulation over a grid", allow_abbrev=False)
    _add_run_flags(compare)
    compare.add_argument("--censoring", choices=[policy.value for policy in CensoringPolicy], default=CensoringPolicy.EXCLUDE.value)
    compare.add_argument("--grid", help="JSON grid file (default: the twelve-row M = 8 grid)")
    compare.add_argument("--raw-out", help="Per-replicate CSV output file")
    _add_output_flags(compare)
    compare.set_defaults(handler=cmd_compare)

    sweep = subparsers.add_parser("sweep", help="Theory values along one parameter axis", allow_abbrev=False)
    _add_layout_flags(sweep)
    sweep.add_argument("--axis", choices=("mu", "lambda", "n"), required=True)
    sweep.add_argument("--values", required=True, help="Comma-separated integers, e.g. 4,10,20,30")
    _add_output_flags(sweep)
    sweep.set_defaults(handler=cmd_sweep)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _configure_logging()
        _resolve_defaults(args)
        return args.handler(args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (RoyalRoadError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
