"""
Seeded replicate execution, summary statistics and theory-vs-simulation tables.
"""

import csv
import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TextIO

import numpy as np

from engine import EAConfig, InitPolicy, RunResult, run
from errors import InvalidInputError
from oracle import exact_expected_time_mp
from royal_road import RoyalRoadLayout
from theory import ModelParams, TheoryReport, exact_expected_time, theory_report

logger = logging.getLogger(__name__)

type ProgressCallback = Callable[[int], None]

SUMMARY_HEADER = (
    "n",
    "K",
    "M",
    "mu",
    "lambda",
    "exact",
    "approx",
    "asymptotic_scale",
    "empirical_mean",
    "empirical_std",
    "ci95",
    "hits",
    "runs",
    "master_seed",
)
REPLICATE_HEADER = ("row_index", "replicate", "seed", "hit_generation")

Z_95 = 1.96
CI_METHOD = "normal approximation, half-width 1.96 * std / sqrt(hits)"
THEORY_BAND = 0.02


class CensoringPolicy(StrEnum):
    """How replicates that never hit enter the empirical mean."""

    EXCLUDE = "exclude"
    BUDGET = "budget"


@dataclass(frozen=True)
class ExperimentRow:
    layout: RoyalRoadLayout
    mu: int
    lam: int

    def __post_init__(self) -> None:
        # Reuse the model's validation so a bad row fails before any run starts.
        ModelParams(self.layout, self.mu, self.lam)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.layout, self.mu, self.lam)


@dataclass(frozen=True)
class ExperimentSpec:
    rows: tuple[ExperimentRow, ...]
    runs_per_row: int
    max_generations: int
    master_seed: int
    init_policy: InitPolicy = InitPolicy.HALF_ONES
    censoring: CensoringPolicy = CensoringPolicy.EXCLUDE

    def __post_init__(self) -> None:
        if self.runs_per_row < 1:
            raise InvalidInputError("runs must be at least 1")
        if not self.rows:
            raise InvalidInputError("experiment needs at least one row")
        # Validates generations and seed against the engine's limits.
        EAConfig(mu=1, lam=2, max_generations=self.max_generations, seed=self.master_seed)


@dataclass(frozen=True)
class SummaryRow:
    n: int
    K: int
    M: int
    mu: int
    lam: int
    exact: float
    approx: float
    asymptotic_scale: float
    empirical_mean: float | None
    empirical_std: float | None
    ci95_half_width: float | None
    hits: int
    runs: int
    budget_mean: float
    censoring: CensoringPolicy = CensoringPolicy.EXCLUDE
    mean_elite_count: float = math.nan

    @property
    def flagged(self) -> bool:
        """No replicate reached the optimum, so there is no empirical mean."""
        return self.empirical_mean is None


@dataclass(frozen=True)
class ReplicateResult:
    """
    What a worker sends back for one run.

    ``generations`` is the hitting generation, or the budget for a run that
    never hit; ``mean_elite_count`` averages the members tied at the best
    fitness over every generation of the run.
    """

    hit_generation: int | None
    generations: int
    mean_elite_count: float

    @classmethod
    def from_run(cls, result: RunResult) -> "ReplicateResult":
        elites = result.elite_count_trace
        return cls(
            hit_generation=result.hit_generation,
            generations=len(result.best_fitness_trace) - 1,
            mean_elite_count=float(np.mean(elites)) if elites else math.nan,
        )


@dataclass(frozen=True)
class ReplicateRecord:
    row_index: int
    replicate: int
    seed: int
    hit_generation: int | None


@dataclass
class ExperimentOutcome:
    summaries: list[SummaryRow] = field(default_factory=list)
    replicates: list[ReplicateRecord] = field(default_factory=list)


@dataclass(frozen=True)
class PublishedRow:
    n: int
    K: int
    M: int
    mu: int
    lam: int
    exact: float
    empirical: float

    @property
    def row(self) -> ExperimentRow:
        return ExperimentRow(RoyalRoadLayout(self.n, self.K, self.M), self.mu, self.lam)


# Published theory and 20-run empirical columns, in publication order.
PUBLISHED_ROWS: tuple[PublishedRow, ...] = (
    PublishedRow(32, 4, 8, 4, 4, 145.0, 315.31),
    PublishedRow(32, 4, 8, 10, 10, 72.4, 268.22),
    PublishedRow(32, 4, 8, 20, 20, 44.2, 192.29),
    PublishedRow(32, 4, 8, 30, 30, 34.5, 173.56),
    PublishedRow(64, 8, 8, 4, 4, 570.62, 612.46),
    PublishedRow(64, 8, 8, 10, 10, 279.88, 497.93),
    PublishedRow(64, 8, 8, 20, 20, 153.46, 454.47),
    PublishedRow(64, 8, 8, 30, 30, 112.30, 372.04),
    PublishedRow(128, 16, 8, 4, 4, 2264.36, 1365.0),
    PublishedRow(128, 16, 8, 10, 10, 1048.0, 1239.0),
    PublishedRow(128, 16, 8, 20, 20, 570.44, 1091.5),
    PublishedRow(128, 16, 8, 30, 30, 401.99, 949.4),
)


def published_grid() -> list[ExperimentRow]:
    return [published.row for published in PUBLISHED_ROWS]


def child_seed(master_seed: int, row_index: int, replicate: int) -> int:
    """
    64-bit seed of one replicate, derived from the master seed and its position.

    Args:
        master_seed: The experiment's master seed
        row_index: Index of the row in the experiment grid
        replicate: Index of the replicate within the row

    Returns:
        A seed suitable for ``EAConfig.seed``
    """
    sequence = np.random.SeedSequence(master_seed, spawn_key=(row_index, replicate))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _run_replicate(task: tuple[ExperimentRow, EAConfig]) -> ReplicateResult:
    row, config = task
    return ReplicateResult.from_run(run(config, row.layout))


def _execute(
    tasks: Sequence[tuple[ExperimentRow, EAConfig]],
    workers: int,
    progress: ProgressCallback | None,
) -> list[ReplicateResult]:
    """Run every task; results come back in task order whatever the worker count."""
    results: list[ReplicateResult] = []
    if workers <= 1 or len(tasks) == 1:
        mapped: Iterable[ReplicateResult] = map(_run_replicate, tasks)
        for result in mapped:
            results.append(result)
            if progress:
                progress(1)
        return results

    chunksize = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        for result in executor.map(_run_replicate, tasks, chunksize=chunksize):
            results.append(result)
            if progress:
                progress(1)
    return results


def _replicate_tasks(
    row: ExperimentRow,
    row_index: int,
    runs: int,
    max_generations: int,
    master_seed: int,
    init_policy: InitPolicy,
) -> list[tuple[ExperimentRow, EAConfig]]:
    return [
        (
            row,
            EAConfig(
                mu=row.mu,
                lam=row.lam,
                max_generations=max_generations,
                init_policy=init_policy,
                seed=child_seed(master_seed, row_index, replicate),
            ),
        )
        for replicate in range(runs)
    ]


def run_replicates(
    row: ExperimentRow,
    runs: int,
    max_generations: int,
    master_seed: int,
    *,
    row_index: int = 0,
    workers: int = 1,
    init_policy: InitPolicy = InitPolicy.HALF_ONES,
    progress: ProgressCallback | None = None,
) -> list[ReplicateResult]:
    """
    Run ``runs`` seeded replicates of one grid row.

    Replicate i uses ``child_seed(master_seed, row_index, i)``, so the results
    do not depend on the worker count or on completion order.
    """
    if runs < 1:
        raise InvalidInputError("runs must be at least 1")
    tasks = _replicate_tasks(row, row_index, runs, max_generations, master_seed, init_policy)
    return _execute(tasks, workers, progress)


def _mean_std_ci(sample: list[int]) -> tuple[float, float, float]:
    values = np.array(sorted(sample), dtype=np.float64)
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0, 0.0
    std = float(values.std(ddof=1))
    return mean, std, Z_95 * std / math.sqrt(values.size)


def summarize(
    results: Sequence[ReplicateResult],
    theory: TheoryReport,
    row: ExperimentRow,
    censoring: CensoringPolicy = CensoringPolicy.EXCLUDE,
) -> SummaryRow:
    """
    Combine one row's replicates with its theory values.

    Args:
        results: The row's replicates, non-empty
        theory: Theory values for the row
        row: The grid row
        censoring: EXCLUDE drops non-hitting replicates; BUDGET counts them at
            the generation budget

    Returns:
        The summary; empirical fields are None when EXCLUDE leaves no replicate
    """
    if not results:
        raise InvalidInputError("cannot summarize an empty set of replicates")
    hit_times = [r.hit_generation for r in results if r.hit_generation is not None]
    budget_sample = [r.generations for r in results]
    budget_mean, _, _ = _mean_std_ci(budget_sample)

    sample = hit_times if censoring is CensoringPolicy.EXCLUDE else budget_sample
    mean: float | None = None
    std: float | None = None
    ci: float | None = None
    if sample:
        mean, std, ci = _mean_std_ci(sample)
    else:
        logger.warning(f"No replicate hit the optimum for n={row.layout.n} mu={row.mu} lambda={row.lam}")

    if len(hit_times) < len(results):
        logger.info(
            f"{len(results) - len(hit_times)} of {len(results)} replicates censored at the budget "
            f"(n={row.layout.n} mu={row.mu} lambda={row.lam}); budget-censored mean {budget_mean:.6g}"
        )

    elite_counts = sorted(r.mean_elite_count for r in results if not math.isnan(r.mean_elite_count))
    mean_elite_count = float(np.mean(elite_counts)) if elite_counts else math.nan
    logger.info(f"Mean elite count {mean_elite_count:.4g} of mu={row.mu} (n={row.layout.n} lambda={row.lam})")

    layout = row.layout
    return SummaryRow(
        n=layout.n,
        K=layout.K,
        M=layout.M,
        mu=row.mu,
        lam=row.lam,
        exact=theory.exact,
        approx=theory.approx,
        asymptotic_scale=theory.asymptotic_scale,
        empirical_mean=mean,
        empirical_std=std,
        ci95_half_width=ci,
        hits=len(hit_times),
        runs=len(results),
        budget_mean=budget_mean,
        censoring=censoring,
        mean_elite_count=mean_elite_count,
    )


def run_experiment(
    spec: ExperimentSpec,
    *,
    workers: int = 1,
    progress: ProgressCallback | None = None,
) -> ExperimentOutcome:
    """
    Run every row of ``spec`` and summarize it, rows in grid order.

    All replicates of all rows share one worker pool.
    """
    tasks: list[tuple[ExperimentRow, EAConfig]] = []
    for row_index, row in enumerate(spec.rows):
        tasks.extend(
            _replicate_tasks(row, row_index, spec.runs_per_row, spec.max_generations, spec.master_seed, spec.init_policy)
        )
    logger.info(f"Running {len(spec.rows)} rows x {spec.runs_per_row} replicates on {workers} worker(s)")
    results = _execute(tasks, workers, progress)

    outcome = ExperimentOutcome()
    for row_index, row in enumerate(spec.rows):
        start = row_index * spec.runs_per_row
        row_results = results[start : start + spec.runs_per_row]
        outcome.summaries.append(summarize(row_results, theory_report(row.params), row, spec.censoring))
        outcome.replicates.extend(
            ReplicateRecord(row_index, replicate, config.seed, result.hit_generation)
            for replicate, ((_, config), result) in enumerate(
                zip(tasks[start : start + spec.runs_per_row], row_results)
            )
        )
        logger.info(f"Row {row_index} (n={row.layout.n} mu={row.mu} lambda={row.lam}) done")
    return outcome


def published_experiment(
    runs: int = 400,
    max_generations: int = 2000,
    master_seed: int = 0,
    *,
    workers: int = 1,
    init_policy: InitPolicy = InitPolicy.HALF_ONES,
    censoring: CensoringPolicy = CensoringPolicy.EXCLUDE,
    progress: ProgressCallback | None = None,
) -> list[SummaryRow]:
    """The twelve-row publication grid (M = 8, n in {32, 64, 128}, mu = lambda in {4, 10, 20, 30})."""
    spec = ExperimentSpec(
        rows=tuple(published_grid()),
        runs_per_row=runs,
        max_generations=max_generations,
        master_seed=master_seed,
        init_policy=init_policy,
        censoring=censoring,
    )
    return run_experiment(spec, workers=workers, progress=progress).summaries


@dataclass(frozen=True)
class TheoryCheck:
    published: PublishedRow
    exact: float
    oracle: float | None

    @property
    def relative_error(self) -> float:
        return abs(self.exact - self.published.exact) / self.published.exact

    @property
    def within_band(self) -> bool:
        return self.relative_error <= THEORY_BAND


def check_published_theory() -> list[TheoryCheck]:
    """
    Compare the exact expectation with the published theory column.

    Rows outside the +-2% band are re-evaluated at 50 digits and logged.
    """
    checks: list[TheoryCheck] = []
    for published in PUBLISHED_ROWS:
        params = published.row.params
        exact = exact_expected_time(params)
        oracle = None
        if abs(exact - published.exact) / published.exact > THEORY_BAND:
            oracle = float(exact_expected_time_mp(params))
            logger.warning(
                f"Exact time {exact:.6g} for n={published.n} mu={published.mu} lambda={published.lam} is outside the band "
                f"around the published {published.exact}; 50-digit value {oracle:.15g}"
            )
        checks.append(TheoryCheck(published=published, exact=exact, oracle=oracle))
    return checks


def format_real(value: float | None) -> str:
    """Six significant digits, or an empty field for a missing value."""
    if value is None or math.isnan(value):
        return ""
    return f"{value:.6g}"


def summary_fields(row: SummaryRow, master_seed: int) -> list[str]:
    return [
        str(row.n),
        str(row.K),
        str(row.M),
        str(row.mu),
        str(row.lam),
        format_real(row.exact),
        format_real(row.approx),
        format_real(row.asymptotic_scale),
        format_real(row.empirical_mean),
        format_real(row.empirical_std),
        format_real(row.ci95_half_width),
        str(row.hits),
        str(row.runs),
        str(master_seed),
    ]


def write_summary_csv(rows: Iterable[SummaryRow], stream: TextIO, master_seed: int) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for row in rows:
        writer.writerow(summary_fields(row, master_seed))


def write_replicates_csv(records: Iterable[ReplicateRecord], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPLICATE_HEADER)
    for record in records:
        hit = "" if record.hit_generation is None else str(record.hit_generation)
        writer.writerow([record.row_index, record.replicate, record.seed, hit])
