"""Tests for experiments.py"""

import csv
import io
import math
import random

import pytest

from engine import EAConfig, RunResult, run
from errors import InvalidInputError
from experiments import (
    REPLICATE_HEADER,
    SUMMARY_HEADER,
    PUBLISHED_ROWS,
    CensoringPolicy,
    ExperimentRow,
    ExperimentSpec,
    ReplicateRecord,
    ReplicateResult,
    check_published_theory,
    child_seed,
    format_real,
    run_experiment,
    run_replicates,
    summarize,
    published_experiment,
    published_grid,
    write_replicates_csv,
    write_summary_csv,
)
from royal_road import RoyalRoadLayout
from theory import theory_report


ROW = ExperimentRow(RoyalRoadLayout(32, 4, 8), 4, 4)
TINY_ROW = ExperimentRow(RoyalRoadLayout(8, 2, 4), 2, 2)


def _hit(generation, elites=1.0):
    return ReplicateResult(hit_generation=generation, generations=generation, mean_elite_count=elites)


def _miss(budget, elites=1.0):
    return ReplicateResult(hit_generation=None, generations=budget, mean_elite_count=elites)


@pytest.fixture
def report():
    return theory_report(ROW.params)


class TestExperimentTypes:
    """Tests for ExperimentRow and ExperimentSpec validation."""

    def test_invalid_row(self):
        """Test that an odd lambda is rejected when the row is built."""
        with pytest.raises(InvalidInputError, match="lambda must be even"):
            ExperimentRow(RoyalRoadLayout(32, 4, 8), 4, 5)

    def test_no_runs(self):
        """Test that a spec needs at least one run per row."""
        with pytest.raises(InvalidInputError):
            ExperimentSpec(rows=(ROW,), runs_per_row=0, max_generations=10, master_seed=0)

    def test_no_rows(self):
        """Test that a spec needs at least one row."""
        with pytest.raises(InvalidInputError):
            ExperimentSpec(rows=(), runs_per_row=1, max_generations=10, master_seed=0)

    def test_published_grid(self):
        """Test the twelve published rows in order."""
        grid = published_grid()
        assert len(grid) == 12
        assert [(r.layout.n, r.mu) for r in grid[:5]] == [(32, 4), (32, 10), (32, 20), (32, 30), (64, 4)]
        assert all(r.layout.M == 8 and r.mu == r.lam for r in grid)


class TestChildSeed:
    """Tests for child_seed function."""

    def test_deterministic(self):
        """Test that the same position always gives the same seed."""
        assert child_seed(7, 2, 3) == child_seed(7, 2, 3)

    def test_distinct(self):
        """Test that positions and master seeds give different seeds."""
        seeds = {child_seed(master, row, rep) for master in (0, 1) for row in range(3) for rep in range(20)}
        assert len(seeds) == 120

    def test_range(self):
        """Test that seeds fit in 64 unsigned bits."""
        assert all(0 <= child_seed(0, 0, rep) < 1 << 64 for rep in range(50))


class TestReplicateResult:
    """Tests for ReplicateResult records."""

    def test_from_hitting_run(self):
        """Test that a hitting run keeps its hit time and the mean elite count."""
        result = RunResult(hit_generation=3, best_fitness_trace=[0, 0, 8, 32], elite_count_trace=[4, 2, 1, 1])
        assert ReplicateResult.from_run(result) == ReplicateResult(hit_generation=3, generations=3, mean_elite_count=2.0)

    def test_from_censored_run(self):
        """Test that a run that never hit reports the budget as its generation count."""
        result = RunResult(hit_generation=None, best_fitness_trace=[0] * 51, elite_count_trace=[1, 3] * 25 + [2])
        record = ReplicateResult.from_run(result)
        assert record.hit_generation is None
        assert record.generations == 50
        assert record.mean_elite_count == 2.0

    def test_replicates_carry_no_traces(self):
        """Test that replicate results hold only the summary values, not the per-generation traces."""
        results = run_replicates(TINY_ROW, 3, 200, master_seed=2)
        assert all(isinstance(r, ReplicateResult) for r in results)
        assert not any(hasattr(r, "best_fitness_trace") or hasattr(r, "elite_count_trace") for r in results)
        assert all(1.0 <= r.mean_elite_count <= TINY_ROW.mu for r in results)


class TestRunReplicates:
    """Tests for run_replicates function."""

    def test_single_run_matches_engine(self):
        """Test that one replicate equals engine.run under the derived seed."""
        results = run_replicates(ROW, 1, 300, master_seed=5)
        config = EAConfig(mu=4, lam=4, max_generations=300, seed=child_seed(5, 0, 0))
        assert results == [ReplicateResult.from_run(run(config, ROW.layout))]

    def test_repeatable(self):
        """Test that two executions give identical results."""
        assert run_replicates(ROW, 5, 200, master_seed=9) == run_replicates(ROW, 5, 200, master_seed=9)

    def test_row_index_changes_seeds(self):
        """Test that the row index enters the child seeds."""
        first = run_replicates(TINY_ROW, 20, 2000, master_seed=9, row_index=0)
        second = run_replicates(TINY_ROW, 20, 2000, master_seed=9, row_index=1)
        assert [r.hit_generation for r in first] != [r.hit_generation for r in second]

    def test_worker_count_does_not_matter(self):
        """Test that a process pool returns the sequential results in order."""
        sequential = run_replicates(TINY_ROW, 6, 500, master_seed=3, workers=1)
        pooled = run_replicates(TINY_ROW, 6, 500, master_seed=3, workers=2)
        assert pooled == sequential

    def test_progress_callback(self):
        """Test that progress is reported once per replicate."""
        ticks = []
        run_replicates(TINY_ROW, 4, 100, master_seed=0, progress=ticks.append)
        assert ticks == [1, 1, 1, 1]

    def test_no_runs(self):
        """Test that zero runs is rejected."""
        with pytest.raises(InvalidInputError):
            run_replicates(ROW, 0, 100, master_seed=0)


class TestSummarize:
    """Tests for summarize function."""

    def test_constant_hits(self, report):
        """Test that identical hitting times give mean 10 and std 0."""
        row = summarize([_hit(10)] * 4, report, ROW)
        assert row.empirical_mean == 10.0
        assert row.empirical_std == 0.0
        assert row.ci95_half_width == 0.0
        assert (row.hits, row.runs) == (4, 4)

    def test_two_hits(self, report):
        """Test the unbiased standard deviation of {5, 15}."""
        row = summarize([_hit(5), _hit(15)], report, ROW)
        assert row.empirical_mean == 10.0
        assert row.empirical_std == pytest.approx(7.0710678, rel=1e-7)
        assert row.ci95_half_width == pytest.approx(1.96 * 7.0710678 / math.sqrt(2), rel=1e-7)

    def test_single_hit(self, report):
        """Test that one hit gives std and CI of 0."""
        row = summarize([_hit(12), _miss(50)], report, ROW)
        assert row.empirical_mean == 12.0
        assert row.empirical_std == 0.0
        assert row.ci95_half_width == 0.0

    def test_no_hits(self, report):
        """Test that a row without hits is flagged and has no empirical mean."""
        row = summarize([_miss(50), _miss(50)], report, ROW)
        assert row.flagged
        assert row.empirical_mean is None
        assert row.empirical_std is None
        assert row.hits == 0
        assert row.budget_mean == 50.0

    def test_misses_are_reported(self, report):
        """Test that non-hitting replicates count in runs and the budget mean."""
        row = summarize([_hit(10), _hit(20), _miss(100)], report, ROW)
        assert (row.hits, row.runs) == (2, 3)
        assert row.empirical_mean == 15.0
        assert row.budget_mean == pytest.approx(130 / 3)

    def test_budget_censoring(self, report):
        """Test that BUDGET counts misses at the generation budget."""
        row = summarize([_hit(10), _hit(20), _miss(100)], report, ROW, CensoringPolicy.BUDGET)
        assert row.empirical_mean == pytest.approx(130 / 3)
        assert row.hits == 2
        assert row.censoring is CensoringPolicy.BUDGET

    def test_permutation_invariant(self, report):
        """Test that shuffling replicates leaves the summary unchanged."""
        results = [_hit(g) for g in (3, 17, 8, 250, 41, 9, 77)] + [_miss(300)]
        shuffled = results[:]
        random.Random(4).shuffle(shuffled)
        assert summarize(results, report, ROW) == summarize(shuffled, report, ROW)

    def test_mean_elite_count(self, report):
        """Test that the summary averages the per-replicate elite counts."""
        row = summarize([_hit(10, elites=1.0), _hit(20, elites=2.0), _miss(100, elites=3.0)], report, ROW)
        assert row.mean_elite_count == 2.0

    def test_theory_fields(self, report):
        """Test that theory values and geometry are carried over."""
        row = summarize([_hit(10)], report, ROW)
        assert (row.n, row.K, row.M, row.mu, row.lam) == (32, 4, 8, 4, 4)
        assert row.exact == report.exact
        assert row.approx == report.approx
        assert row.asymptotic_scale == report.asymptotic_scale

    def test_empty(self, report):
        """Test that an empty result set is rejected."""
        with pytest.raises(InvalidInputError):
            summarize([], report, ROW)


class TestRunExperiment:
    """Tests for run_experiment and published_experiment."""

    def test_rows_and_replicates(self):
        """Test summaries in grid order and one record per replicate."""
        spec = ExperimentSpec(rows=(TINY_ROW, ROW), runs_per_row=3, max_generations=400, master_seed=11)
        outcome = run_experiment(spec)
        assert [s.n for s in outcome.summaries] == [8, 32]
        assert len(outcome.replicates) == 6
        assert [(r.row_index, r.replicate) for r in outcome.replicates] == [(i, j) for i in range(2) for j in range(3)]
        assert all(r.seed == child_seed(11, r.row_index, r.replicate) for r in outcome.replicates)
        hits = run_replicates(ROW, 3, 400, master_seed=11, row_index=1)
        assert [r.hit_generation for r in outcome.replicates[3:]] == [h.hit_generation for h in hits]

    def test_empirical_mean_at_least_one(self):
        """Test that half-ones initialization never hits at generation 0."""
        spec = ExperimentSpec(rows=(TINY_ROW,), runs_per_row=20, max_generations=2000, master_seed=1)
        summary = run_experiment(spec).summaries[0]
        assert summary.hits > 0
        assert summary.empirical_mean >= 1

    def test_published_experiment_shape(self, monkeypatch):
        """Test that the twelve rows come back in published order."""
        monkeypatch.setattr("experiments._execute", lambda tasks, workers, progress: [_hit(7) for _ in tasks])
        rows = published_experiment(runs=2, max_generations=50, master_seed=0)
        assert [(r.n, r.mu) for r in rows] == [(p.n, p.mu) for p in PUBLISHED_ROWS]
        assert all(r.empirical_mean == 7.0 for r in rows)

    @pytest.mark.slow
    def test_published_empirical_means(self):
        """Test 400-run means against the published empirical column within 25%."""
        selected = [PUBLISHED_ROWS[0], PUBLISHED_ROWS[3], PUBLISHED_ROWS[4]]
        spec = ExperimentSpec(rows=tuple(p.row for p in selected), runs_per_row=400, max_generations=2000, master_seed=0)
        outcome = run_experiment(spec, workers=4)
        for published, summary in zip(selected, outcome.summaries):
            assert abs(summary.empirical_mean - published.empirical) / published.empirical < 0.25

    @pytest.mark.slow
    def test_empirical_mean_decreases_with_mu(self):
        """Test that the n=32 block's empirical means decrease with mu at 95% confidence."""
        spec = ExperimentSpec(rows=tuple(p.row for p in PUBLISHED_ROWS[:4]), runs_per_row=400, max_generations=2000, master_seed=0)
        summaries = run_experiment(spec, workers=4).summaries
        for larger, smaller in zip(summaries, summaries[1:]):
            gap = larger.empirical_mean - smaller.empirical_mean
            assert gap > math.hypot(larger.ci95_half_width, smaller.ci95_half_width)


class TestTheoryCheck:
    """Tests for check_published_theory function."""

    def test_one_row_out_of_band(self):
        """Test that only n=64, mu=lambda=10 falls outside the band and carries a 50-digit value."""
        checks = check_published_theory()
        outside = [c for c in checks if not c.within_band]
        assert [(c.published.n, c.published.mu) for c in outside] == [(64, 10)]
        assert outside[0].oracle == pytest.approx(outside[0].exact, rel=1e-12)
        assert all(c.oracle is None for c in checks if c.within_band)


class TestCsvOutput:
    """Tests for the CSV writers."""

    def test_format_real(self):
        """Test six significant digits and empty fields for missing values."""
        assert format_real(144.99823) == "144.998"
        assert format_real(0.000123456789) == "0.000123457"
        assert format_real(None) == ""
        assert format_real(math.nan) == ""

    def test_summary_header_and_rows(self, report):
        """Test the documented header and one line per row."""
        rows = [summarize([_hit(5), _hit(15)], report, ROW), summarize([_miss(10)], report, ROW)]
        buffer = io.StringIO()
        write_summary_csv(rows, buffer, master_seed=42)
        lines = buffer.getvalue().split("\n")
        assert lines[0] == ",".join(SUMMARY_HEADER)
        assert lines[0] == "n,K,M,mu,lambda,exact,approx,asymptotic_scale,empirical_mean,empirical_std,ci95,hits,runs,master_seed"
        assert lines[-1] == ""
        parsed = list(csv.DictReader(io.StringIO(buffer.getvalue())))
        assert parsed[0]["empirical_mean"] == "10"
        assert parsed[0]["exact"] == format_real(report.exact)
        assert parsed[0]["master_seed"] == "42"
        assert parsed[1]["empirical_mean"] == ""
        assert parsed[1]["hits"] == "0"

    def test_replicates_csv(self):
        """Test per-replicate lines with an empty field for misses."""
        records = [ReplicateRecord(0, 0, 123, 17), ReplicateRecord(0, 1, 456, None)]
        buffer = io.StringIO()
        write_replicates_csv(records, buffer)
        assert buffer.getvalue() == ",".join(REPLICATE_HEADER) + "\n0,0,123,17\n0,1,456,\n"

    def test_deterministic_table(self):
        """Test that the same spec writes byte-identical CSV."""
        spec = ExperimentSpec(rows=(TINY_ROW, ROW), runs_per_row=4, max_generations=300, master_seed=77)
        outputs = []
        for _ in range(2):
            buffer = io.StringIO()
            write_summary_csv(run_experiment(spec).summaries, buffer, master_seed=77)
            outputs.append(buffer.getvalue())
        assert outputs[0] == outputs[1]
