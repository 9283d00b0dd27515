import numpy as np
import pytest

from seafloorkit.atr import ConstantRateDetector, Contact
from seafloorkit.core import GeoGrid
from seafloorkit.errors import NoTrials
from seafloorkit.insertion import default_models
from seafloorkit.perfmap import (MonteCarloConfig, PerformanceMap, binarize,
                                 densify, ensonified_area_m2, run_monte_carlo)
from seafloorkit.sim import SensorModel, render_sidescan, straight_trajectory
from tests.test_sim import flat_terrain

ALT = 10.0


@pytest.fixture(scope="module")
def swath_image():
    sensor = SensorModel()
    terrain = flat_terrain(extent=(42.0, 40.0), back=0.5)
    traj = straight_trajectory((0, 0), 0.0, 35, sensor.ping_resolution)
    img, _ = render_sidescan(terrain, traj, sensor, seed=8)
    return img


def hand_map(successes, trials, fad=0.0):
    s = GeoGrid((0, 0), 5.0, np.array(successes, dtype=np.int64), nodata=-1)
    t = GeoGrid((0, 0), 5.0, np.array(trials, dtype=np.int64), nodata=-1)
    return PerformanceMap(successes=s, trials=t, fad=fad, n_passes=1,
                          false_alarm_count=0, ensonified_area_m2=1.0)


class TestPerformanceMap:
    def test_pd_arithmetic(self):
        pmap = hand_map([[3, 0]], [[4, 0]])
        pd = pmap.pd_grid()
        assert pd.values[0, 0] == pytest.approx(0.75)
        assert np.isnan(pd.values[0, 1])
        assert pmap.mean_pd() == pytest.approx(0.75)

    def test_mean_pd_no_trials(self):
        with pytest.raises(NoTrials):
            hand_map([[0]], [[0]]).mean_pd()


class TestRunMonteCarlo:
    def test_detect_everything_gives_pd_one(self, swath_image):
        cfg = MonteCarloConfig(n_passes=3, contacts_per_pass=5, seed=1)
        pmap = run_monte_carlo(swath_image, default_models(),
                               ConstantRateDetector(1.0, seed=0), cfg)
        trials = pmap.trials.values
        assert trials.sum() == 15
        np.testing.assert_array_equal(pmap.successes.values, trials)
        assert pmap.mean_pd() == 1.0
        assert pmap.fad == 0.0

    def test_detect_nothing_gives_pd_zero(self, swath_image):
        cfg = MonteCarloConfig(n_passes=2, contacts_per_pass=5, seed=1)
        pmap = run_monte_carlo(swath_image, default_models(),
                               ConstantRateDetector(0.0, seed=0), cfg)
        assert pmap.successes.values.sum() == 0
        assert pmap.trials.values.sum() == 10
        assert pmap.mean_pd() == 0.0

    def test_false_alarm_density(self, swath_image):
        # A detector emitting two contacts far outside the swath per pass:
        # both are always unmatched, so FAD = 2 / (area_ha) per pass.
        class TwoFalseAlarms:
            def detect(self, image):
                return [Contact(0, 0, (-100.0, -100.0), 0.9),
                        Contact(0, 0, (-200.0, -200.0), 0.9)]

        cfg = MonteCarloConfig(n_passes=4, contacts_per_pass=3, seed=1)
        pmap = run_monte_carlo(swath_image, default_models(),
                               TwoFalseAlarms(), cfg)
        assert pmap.false_alarm_count == 8
        area_ha = ensonified_area_m2(swath_image) / 10_000.0
        assert pmap.fad == pytest.approx(2.0 / area_ha)

    def test_deterministic(self, swath_image):
        cfg = MonteCarloConfig(n_passes=2, contacts_per_pass=4, seed=5)
        a = run_monte_carlo(swath_image, default_models(),
                            ConstantRateDetector(0.6, seed=3), cfg)
        b = run_monte_carlo(swath_image, default_models(),
                            ConstantRateDetector(0.6, seed=3), cfg)
        np.testing.assert_array_equal(a.successes.values, b.successes.values)
        np.testing.assert_array_equal(a.trials.values, b.trials.values)
        assert a.fad == b.fad

    def test_successes_bounded_by_trials(self, swath_image):
        cfg = MonteCarloConfig(n_passes=3, contacts_per_pass=4, seed=2)
        pmap = run_monte_carlo(swath_image, default_models(),
                               ConstantRateDetector(0.5, seed=1), cfg)
        assert (pmap.successes.values <= pmap.trials.values).all()

    def test_ensonified_area(self, swath_image):
        max_ground = np.sqrt(40.0 ** 2 - ALT ** 2)
        expected = max_ground * swath_image.pings * 0.1
        assert ensonified_area_m2(swath_image) == pytest.approx(expected)


class TestDensify:
    def test_constant_value_fills_constant(self):
        pmap = hand_map([[3, 0, 3], [0, 0, 0]], [[4, 0, 4], [0, 0, 0]])
        filled = densify(pmap)
        np.testing.assert_allclose(filled.values, 0.75)

    def test_within_range_of_sources(self):
        rng = np.random.default_rng(0)
        t = (rng.random((6, 6)) < 0.4).astype(np.int64) * 4
        s = (rng.random((6, 6)) * (t + 1)).astype(np.int64)
        s = np.minimum(s, t)
        pmap = hand_map(s, t)
        pd = pmap.pd_grid()
        lo, hi = np.nanmin(pd.values), np.nanmax(pd.values)
        filled = densify(pmap)
        assert np.isfinite(filled.values).all()
        assert (filled.values >= lo - 1e-9).all()
        assert (filled.values <= hi + 1e-9).all()
        # trialed cells keep their measured value
        mask = ~np.isnan(pd.values)
        np.testing.assert_allclose(filled.values[mask], pd.values[mask])

    def test_no_trials_raises(self):
        with pytest.raises(NoTrials):
            densify(hand_map([[0, 0]], [[0, 0]]))


class TestBinarize:
    def test_strict_threshold(self):
        g = GeoGrid((0, 0), 5.0, np.array([[0.49, 0.5, 0.51, np.nan]]))
        flags = binarize(g, 0.5)
        np.testing.assert_array_equal(flags.values,
                                      [[True, False, False, False]])

    def test_bad_threshold(self):
        g = GeoGrid((0, 0), 5.0, np.array([[0.5]]))
        with pytest.raises(ValueError):
            binarize(g, 1.5)
