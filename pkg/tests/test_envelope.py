import numpy as np
import pytest

from src.analysis.summary import SummaryCurve, k_function
from src.fitting.cluster import fit_matern_cluster
from src.fitting.pseudolikelihood import fit_poisson
from src.models.config import ChannelConfig, UserPlacement
from src.models.processes import FittedModel, Poisson, Strauss, preset
from src.simulation.samplers import sample_matern_cluster, sample_poisson
from src.utils.errors import ConfigError, EnvelopeError, GridMismatchError
from src.utils.rng import derive_seed, make_rng
from src.validation.envelope import (
    Envelope,
    Statistic,
    TestReport,
    build_envelope,
    envelope_alpha,
    envelope_from_values,
    evaluate_replicates,
    simulate_replicates,
    simulated_curves,
    test_curve as curve_test,
)

MASTER = 99
GRID = np.linspace(0.01, 0.2, 20)


def _band(lower=0.0, upper=1.0):
    return Envelope(GRID, np.full(len(GRID), lower), np.full(len(GRID), upper), nsim=99, nrank=5)


class TestAlpha:
    @pytest.mark.parametrize("nsim, nrank", [(599, 30), (99, 5), (19, 1)])
    def test_ten_percent(self, nsim, nrank):
        assert envelope_alpha(nsim, nrank) == pytest.approx(0.1)

    def test_envelope_reports_alpha(self):
        assert _band().alpha == pytest.approx(0.1)


class TestEnvelopeFromValues:
    def test_rank_bounds(self):
        values = np.arange(1.0, 11.0)[:, None] * np.ones((1, 3))
        env = envelope_from_values(make_rng(0).permutation(values), [0.1, 0.2, 0.3], nrank=2)
        np.testing.assert_array_equal(env.lower, [3.0, 3.0, 3.0])
        np.testing.assert_array_equal(env.upper, [8.0, 8.0, 8.0])

    def test_smaller_nrank_widens(self):
        values = make_rng(1).normal(size=(39, 5))
        grid = np.linspace(0.1, 0.5, 5)
        wide = envelope_from_values(values, grid, nrank=1)
        narrow = envelope_from_values(values, grid, nrank=3)
        assert np.all(wide.lower <= narrow.lower)
        assert np.all(wide.upper >= narrow.upper)
        assert np.all(narrow.lower <= narrow.upper)

    def test_too_many_undefined(self):
        values = make_rng(2).normal(size=(20, 3))
        values[:3, 1] = np.nan
        with pytest.raises(EnvelopeError) as info:
            envelope_from_values(values, [0.1, 0.2, 0.3], nrank=1)
        assert info.value.grid_points == [0.2]

    def test_few_undefined_are_dropped(self):
        values = make_rng(3).normal(size=(20, 2))
        values[0, 0] = np.nan
        env = envelope_from_values(values, [0.1, 0.2], nrank=1)
        assert np.all(np.isfinite(env.lower)) and np.all(np.isfinite(env.upper))
        assert env.undefined_fraction[0] == pytest.approx(0.05)

    @pytest.mark.parametrize("nsim, nrank", [(3, 2), (10, 0)])
    def test_rank_validation(self, nsim, nrank):
        with pytest.raises(ConfigError):
            envelope_from_values(np.zeros((nsim, 1)), [0.1], nrank=nrank)


class TestCurveTest:
    def test_midpoint_not_rejected(self):
        env = _band()
        report = curve_test(SummaryCurve(GRID, env.midpoint, "L"), env)
        assert not report.rejected
        assert report.exceedance_intervals == ()

    def test_single_exceedance_interval(self):
        env = _band()
        values = np.full(len(GRID), 0.5)
        values[(GRID > 0.095) & (GRID < 0.155)] = 2.0
        report = curve_test(SummaryCurve(GRID, values, "L"), env)
        assert report.rejected
        assert len(report.exceedance_intervals) == 1
        lo, hi = report.exceedance_intervals[0]
        assert lo == pytest.approx(0.1)
        assert hi == pytest.approx(0.15)

    def test_separate_runs(self):
        env = _band()
        values = np.full(len(GRID), 0.5)
        values[0] = -1.0
        values[-2:] = 3.0
        report = curve_test(SummaryCurve(GRID, values, "L"), env)
        assert len(report.exceedance_intervals) == 2

    def test_boundary_values_are_inside(self):
        env = _band()
        assert not curve_test(SummaryCurve(GRID, env.upper.copy(), "L"), env).rejected

    def test_undefined_observed_points_are_inside(self):
        env = _band()
        values = np.full(len(GRID), 0.5)
        values[3] = np.nan
        assert not curve_test(SummaryCurve(GRID, values, "L"), env).rejected

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatchError):
            curve_test(SummaryCurve(GRID[:-1], np.zeros(len(GRID) - 1), "L"), _band())

    def test_report_round_trip(self):
        report = TestReport(True, ((0.1, 0.15),), "L", 0.1, "poisson", {"nsim": 99})
        assert TestReport.from_dict(report.to_dict()) == report

    def test_rejected_iff_intervals(self):
        env = _band()
        rng = make_rng(4)
        for _ in range(20):
            report = curve_test(SummaryCurve(GRID, rng.uniform(-0.2, 1.2, len(GRID)), "L"), env)
            assert report.rejected == bool(report.exceedance_intervals)


class TestBuildEnvelope:
    def test_statistic_validation(self):
        with pytest.raises(ConfigError):
            Statistic("pcf")

    def test_deterministic(self, unit):
        a = build_envelope(Poisson(100.0), "L", [0.05, 0.1], nsim=19, nrank=1, seed=7, window=unit)
        b = build_envelope(Poisson(100.0), "L", [0.05, 0.1], nsim=19, nrank=1, seed=7, window=unit)
        np.testing.assert_array_equal(a.lower, b.lower)
        np.testing.assert_array_equal(a.upper, b.upper)

    def test_poisson_envelope_straddles_diagonal(self, unit):
        grid = np.linspace(0.02, 0.2, 10)
        env = build_envelope(FittedModel(Poisson(300.0), unit), "L", grid, nsim=39, nrank=2, seed=11)
        assert np.all(env.lower <= grid)
        assert np.all(grid <= env.upper)

    def test_sparse_model_raises(self, unit):
        with pytest.raises(EnvelopeError):
            build_envelope(Poisson(0.5), "G", [0.1], nsim=19, nrank=1, seed=3, window=unit)

    def test_gibbs_model(self, unit, fast_mcmc):
        model = FittedModel(Strauss(100.0, 0.5, 0.05), unit)
        env = build_envelope(model, "K", [0.05, 0.1], nsim=9, nrank=1, seed=5, mcmc=fast_mcmc)
        assert env.kind == "K"
        assert np.all(env.lower <= env.upper)

    def test_coverage_statistic(self, unit):
        stat = Statistic("coverage", ChannelConfig(), UserPlacement(n_users=200))
        thresholds = [-10.0, 0.0, 10.0]
        env = build_envelope(Poisson(150.0), stat, thresholds, nsim=19, nrank=1, seed=2, window=unit)
        assert np.all((env.lower >= 0) & (env.upper <= 1))
        assert np.all(np.diff(env.upper) <= 0)

    def test_frame_columns(self, unit, poisson_300):
        grid = [0.05, 0.1]
        env = build_envelope(Poisson(300.0), "K", grid, nsim=19, nrank=1, seed=1, window=unit)
        df = env.to_frame(k_function(poisson_300, grid))
        assert list(df.columns) == ["grid", "lower", "upper", "observed"]
        restored = Envelope.from_dict(env.to_dict())
        np.testing.assert_array_equal(restored.upper, env.upper)

    @pytest.mark.slow
    def test_single_point_size(self, unit):
        rejected = 0
        for i in range(400):
            env = build_envelope(Poisson(100.0), "K", [0.1], nsim=99, nrank=5,
                                 seed=derive_seed(MASTER, 0, i), window=unit)
            observed = k_function(sample_poisson(100.0, unit, derive_seed(MASTER, 1, i)), [0.1])
            rejected += curve_test(observed, env).rejected
        assert 0.06 <= rejected / 400 <= 0.14

    @pytest.mark.slow
    def test_power_against_poisson(self, unit):
        spec = preset("urban-mcp")
        grid = np.linspace(0.01, 0.15, 15)
        rejected = 0
        for i in range(30):
            data = sample_matern_cluster(spec.kappa, spec.r, spec.mu, unit, derive_seed(MASTER, 2, i))
            env = build_envelope(fit_poisson(data), "L", grid, nsim=39, nrank=2, seed=derive_seed(MASTER, 3, i))
            rejected += curve_test(Statistic("L").evaluate(data, grid), env).rejected
        assert rejected >= 27

    @pytest.mark.slow
    def test_fitted_cluster_model_is_not_rejected(self, unit):
        spec = preset("urban-mcp")
        grid = np.linspace(0.01, 0.15, 15)
        rejected = 0
        for i in range(30):
            data = sample_matern_cluster(spec.kappa, spec.r, spec.mu, unit, derive_seed(MASTER, 4, i))
            env = build_envelope(fit_matern_cluster(data), "L", grid, nsim=39, nrank=2,
                                 seed=derive_seed(MASTER, 5, i))
            rejected += curve_test(Statistic("L").evaluate(data, grid), env).rejected
        assert rejected <= 6


class TestSharedReplicates:
    def test_reused_draws_reproduce_fresh_envelope(self, unit):
        grid = [0.05, 0.1]
        fresh = build_envelope(Poisson(100.0), "L", grid, nsim=19, nrank=1, seed=7, window=unit)
        draws = simulate_replicates(Poisson(100.0), unit, 19, seed=7)
        reused = build_envelope(Poisson(100.0), "L", grid, nsim=19, nrank=1, seed=7, window=unit, patterns=draws)
        np.testing.assert_array_equal(fresh.lower, reused.lower)
        np.testing.assert_array_equal(fresh.upper, reused.upper)

    def test_same_draws_serve_two_statistics(self, unit):
        draws = simulate_replicates(Poisson(150.0), unit, 9, seed=3)
        k_vals = evaluate_replicates(draws, "K", [0.05, 0.1], seed=4)
        l_vals = evaluate_replicates(draws, "L", [0.05, 0.1], seed=4)
        np.testing.assert_allclose(l_vals, np.sqrt(k_vals / np.pi))
        assert simulated_curves(Poisson(150.0), unit, "K", [0.05, 0.1], 9, seed=3).shape == (9, 2)

    def test_draw_count_must_match_nsim(self, unit):
        draws = simulate_replicates(Poisson(100.0), unit, 5, seed=1)
        with pytest.raises(ConfigError):
            build_envelope(Poisson(100.0), "L", [0.1], nsim=19, nrank=1, seed=1, window=unit, patterns=draws)
