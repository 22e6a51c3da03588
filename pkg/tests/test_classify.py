import math

import numpy as np
import pytest

from src.analysis.classify import (
    InteractionVerdict,
    classify_grid,
    classify_pattern,
    default_side_range,
    estimate_hardcore,
    l_standard_error,
    prejudge,
    survey_subregions,
    verdict_from_l,
)
from src.analysis.summary import SummaryCurve, k_function, l_from_k
from src.models.config import McmcConfig
from src.models.pattern import PointPattern, Window, min_pair_distance
from src.models.processes import preset
from src.simulation.samplers import sample_gibbs, sample_matern_cluster, sample_poisson
from src.utils.errors import ConfigError, DataError
from src.utils.rng import derive_seed

MASTER = 2718
GRID = classify_grid()


def _l_curve(values):
    return SummaryCurve(GRID, np.asarray(values, dtype=float), "L")


class TestVerdict:
    def test_grid(self):
        assert len(GRID) == 64
        assert GRID[0] > 0
        assert GRID[-1] == pytest.approx(0.15)

    def test_above_diagonal(self):
        assert verdict_from_l(_l_curve(GRID * 1.1)) is InteractionVerdict.CLUSTERED

    def test_on_diagonal_counts_as_clustered(self):
        assert verdict_from_l(_l_curve(GRID)) is InteractionVerdict.CLUSTERED

    def test_below_diagonal(self):
        assert verdict_from_l(_l_curve(GRID * 0.9)) is InteractionVerdict.REPULSIVE

    def test_crossing(self):
        values = np.where(GRID < 0.07, GRID * 0.9, GRID * 1.1)
        assert verdict_from_l(_l_curve(values)) is InteractionVerdict.NEITHER

    def test_uninformative_points_are_skipped(self):
        values = np.where(GRID < 0.01, 0.0, GRID * 1.1)
        assert verdict_from_l(_l_curve(values)) is InteractionVerdict.NEITHER
        assert verdict_from_l(_l_curve(values), informative_from=0.01) is InteractionVerdict.CLUSTERED

    def test_dip_inside_band_does_not_block_clustered(self):
        values = np.where(GRID < 0.05, GRID - 0.005, GRID + 0.03)
        assert verdict_from_l(_l_curve(values)) is InteractionVerdict.NEITHER
        assert verdict_from_l(_l_curve(values), tolerance=0.01) is InteractionVerdict.CLUSTERED

    def test_bump_inside_band_does_not_block_repulsive(self):
        values = np.where(GRID < 0.05, GRID + 0.005, GRID - 0.03)
        assert verdict_from_l(_l_curve(values), tolerance=0.01) is InteractionVerdict.REPULSIVE

    def test_curve_inside_band_falls_back_to_signs(self):
        assert verdict_from_l(_l_curve(GRID + 0.002), tolerance=0.01) is InteractionVerdict.CLUSTERED
        assert verdict_from_l(_l_curve(GRID - 0.002), tolerance=0.01) is InteractionVerdict.REPULSIVE
        values = np.where(GRID < 0.07, GRID - 0.002, GRID + 0.002)
        assert verdict_from_l(_l_curve(values), tolerance=0.01) is InteractionVerdict.NEITHER

    def test_excursions_on_both_sides(self):
        values = np.where(GRID < 0.07, GRID - 0.03, GRID + 0.03)
        assert verdict_from_l(_l_curve(values), tolerance=0.01) is InteractionVerdict.NEITHER

    def test_negative_tolerance(self):
        with pytest.raises(ConfigError):
            verdict_from_l(_l_curve(GRID), tolerance=-0.1)

    def test_standard_error(self):
        assert l_standard_error(101, 1.0) == pytest.approx(math.sqrt(1.0 / (2 * math.pi * 101 * 100)))
        assert l_standard_error(101, 4.0) == pytest.approx(2 * l_standard_error(101, 1.0))
        with pytest.raises(DataError):
            l_standard_error(1, 1.0)

    def test_zero_tolerance_is_the_strict_rule(self, poisson_300):
        strict = classify_pattern(poisson_300, tolerance_se=0.0)
        l_curve = l_from_k(k_function(poisson_300, GRID))
        assert strict is verdict_from_l(l_curve, informative_from=min_pair_distance(poisson_300))

    def test_needs_two_points(self, unit):
        with pytest.raises(DataError):
            classify_pattern(PointPattern(np.array([[0.5, 0.5]]), unit))

    def test_tight_clusters(self, unit):
        pattern = sample_matern_cluster(10.0, 0.03, 30.0, unit, seed=derive_seed(MASTER, 0))
        assert classify_pattern(pattern) is InteractionVerdict.CLUSTERED

    def test_verdict_is_a_string_label(self):
        assert InteractionVerdict.REPULSIVE.value == "repulsive"

    @pytest.mark.slow
    def test_poisson_is_mostly_neither(self, unit):
        verdicts = [classify_pattern(sample_poisson(200.0, unit, derive_seed(MASTER, 1, i))) for i in range(100)]
        assert verdicts.count(InteractionVerdict.NEITHER) > 70

    @pytest.mark.slow
    def test_strauss_hardcore_is_mostly_repulsive(self, unit):
        spec = preset("rural-sh")
        cfg = McmcConfig(n_steps=20_000)
        verdicts = [classify_pattern(sample_gibbs(spec, unit, cfg, derive_seed(MASTER, 2, i))) for i in range(200)]
        assert verdicts.count(InteractionVerdict.REPULSIVE) >= 160
        assert verdicts.count(InteractionVerdict.CLUSTERED) <= 10


class TestSurvey:
    def test_side_range_straddles_counts(self, poisson_300):
        lo, hi = default_side_range(poisson_300, (60, 220))
        lam = poisson_300.intensity()
        assert lam * lo**2 == pytest.approx(60.0)
        assert lam * hi**2 == pytest.approx(220.0)

    def test_fractions_and_determinism(self):
        window = Window(0.0, 2.0, 0.0, 2.0)
        field = sample_poisson(300.0, window, seed=derive_seed(MASTER, 3))
        a = survey_subregions(field, n_subregions=40, seed=5)
        b = survey_subregions(field, n_subregions=40, seed=5)
        assert a == b
        assert a.complete
        assert a.clustered_fraction + a.repulsive_fraction + a.neither_fraction == pytest.approx(1.0)

    def test_partial_result(self, poisson_300):
        result = survey_subregions(poisson_300, n_subregions=5, count_range=(5000, 6000), retry_factor=2)
        assert not result.complete
        assert result.attempts == 10
        assert result.n_classified == 0
        assert math.isnan(result.clustered_fraction)
        assert result.to_dict()["complete"] is False

    def test_invalid_ranges(self, poisson_300):
        with pytest.raises(ConfigError):
            survey_subregions(poisson_300, n_subregions=5, count_range=(100, 50))
        with pytest.raises(ConfigError):
            survey_subregions(poisson_300, n_subregions=5, side_range=(0.5, 2.0))

    def test_empty_pattern(self, unit):
        with pytest.raises(DataError):
            survey_subregions(PointPattern(np.zeros((0, 2)), unit))

    @pytest.mark.slow
    def test_cluster_field_is_mostly_clustered(self):
        spec = preset("urban-mcp")
        window = Window(0.0, 4.0, 0.0, 4.0)
        field = sample_matern_cluster(spec.kappa, spec.r, spec.mu, window, seed=derive_seed(MASTER, 4))
        result = survey_subregions(field, n_subregions=1000, seed=6)
        assert result.complete
        assert result.clustered_fraction > 0.6
        assert result.repulsive_fraction < 0.05

    @pytest.mark.slow
    def test_poisson_field_is_mostly_neither(self):
        window = Window(0.0, 3.0, 0.0, 3.0)
        field = sample_poisson(200.0, window, seed=derive_seed(MASTER, 7))
        result = survey_subregions(field, n_subregions=1000, seed=8)
        assert result.complete
        assert result.clustered_fraction < 0.15
        assert result.repulsive_fraction < 0.15
        assert result.neither_fraction > 0.7

    @pytest.mark.slow
    def test_strauss_hardcore_field_leans_repulsive(self):
        window = Window(0.0, 3.0, 0.0, 3.0)
        field = sample_gibbs(preset("rural-sh"), window, McmcConfig(n_steps=300_000), derive_seed(MASTER, 9))
        result = survey_subregions(field, n_subregions=1000, seed=10)
        assert result.complete
        assert result.repulsive_fraction > 0.4
        assert result.clustered_fraction < 0.05


class TestPrejudge:
    def test_hardcore_estimate(self, unit):
        pattern = PointPattern(np.array([[0.1, 0.1], [0.1, 0.13], [0.6, 0.6], [0.9, 0.2]]), unit)
        assert estimate_hardcore(pattern) == pytest.approx(0.03 * 4 / 5)

    def test_long_frame(self, poisson_300):
        df = prejudge(poisson_300, [0.0, 0.02, 0.04], [0.05, 0.1])
        assert list(df.columns) == ["statistic", "grid", "value", "reference"]
        assert df["statistic"].tolist() == ["G"] * 3 + ["K"] * 2
        np.testing.assert_allclose(df["reference"].iloc[3:], np.pi * np.array([0.05, 0.1]) ** 2)
