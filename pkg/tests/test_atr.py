import numpy as np
import pytest

from seafloorkit.atr import (ConstantRateDetector, Contact, DetectorConfig,
                             TemplateDetector, associate, ground_correct,
                             make_template)
from seafloorkit.core import SidescanImage
from seafloorkit.insertion import (InsertionRecord, cylinder, insert_contact,
                                   insert_random_contacts, default_models)
from seafloorkit.sim import SensorModel, render_sidescan, straight_trajectory
from tests.test_sim import flat_terrain

ALT = 10.0


@pytest.fixture(scope="module")
def sand_image():
    sensor = SensorModel()
    terrain = flat_terrain(extent=(42.0, 40.0), back=0.5)
    traj = straight_trajectory((0, 0), 0.0, 35, sensor.ping_resolution)
    img, _ = render_sidescan(terrain, traj, sensor, seed=8)
    return img


@pytest.fixture(scope="module")
def detector():
    return TemplateDetector(DetectorConfig.build(altitude=ALT))


class TestGroundCorrect:
    def test_resampling_oracle(self):
        # Encode the slant range into the pixel value; the ground-corrected
        # column j must then read the slant of ground range (j + 0.5) * res.
        bins, res = 800, 0.05
        slant = (np.arange(bins) + 0.5) * res
        row = slant / slant.max()
        nav = np.zeros((4, 3))
        img = SidescanImage(np.tile(row, (4, 1)), res, 0.1, nav, altitude=ALT)
        ground, gres = ground_correct(img)
        assert gres == res
        g = (np.arange(ground.shape[1]) + 0.5) * gres
        expected = np.hypot(g, ALT) / slant.max()
        np.testing.assert_allclose(ground[0], expected, atol=2e-3)

    def test_width_drops_nadir(self):
        bins, res = 800, 0.05
        nav = np.zeros((4, 3))
        img = SidescanImage(np.full((4, bins), 0.5), res, 0.1, nav,
                            altitude=ALT)
        ground, gres = ground_correct(img)
        max_ground = np.sqrt((bins * res) ** 2 - ALT ** 2)
        assert ground.shape == (4, int(np.floor(max_ground / res)))


class TestMakeTemplate:
    def test_polarity_and_centre(self):
        tmpl, cx = make_template(cylinder(), 0.0, ALT, 8.0, 0.05, 0.1)
        assert tmpl.max() > 0          # highlight
        assert tmpl.min() == -0.5      # shadow
        assert 0 <= cx < tmpl.shape[1]
        # highlight sits at/near the centre column, shadow beyond it
        hi_cols = np.where((tmpl > 0).any(axis=0))[0]
        sh_cols = np.where((tmpl < 0).any(axis=0))[0]
        assert hi_cols.min() <= cx <= hi_cols.max() + 1
        assert sh_cols.max() > hi_cols.max()

    def test_yaw_changes_footprint(self):
        a, _ = make_template(cylinder(), 0.0, ALT, 8.0, 0.05, 0.1)
        b, _ = make_template(cylinder(), np.pi / 2, ALT, 8.0, 0.05, 0.1)
        assert a.shape != b.shape


class TestTemplateDetector:
    def test_constant_image_no_detections(self, detector):
        nav = np.zeros((60, 3))
        nav[:, 1] = np.arange(60) * 0.1
        img = SidescanImage(np.full((60, 800), 0.5), 0.05, 0.1, nav,
                            altitude=ALT)
        assert detector.detect(img) == []

    def test_single_contact_localised(self, sand_image, detector):
        aug, rec = insert_contact(sand_image, cylinder(), at=(150, 20.0),
                                  yaw=0.3, seed=6)
        contacts = detector.detect(aug)
        matches, _ = associate(contacts, [rec], radius=2.0)
        assert matches[0][1] is not None
        hit = matches[0][1]
        assert np.hypot(hit.geo[0] - rec.geo[0],
                        hit.geo[1] - rec.geo[1]) <= 2.0

    def test_translation_consistency(self, sand_image, detector):
        hits = []
        for ping in (100, 220):
            aug, rec = insert_contact(sand_image, cylinder(),
                                      at=(ping, 20.0), seed=6)
            matches, _ = associate(detector.detect(aug), [rec], radius=2.0)
            assert matches[0][1] is not None
            hits.append(matches[0][1])
        dn = hits[1].geo[1] - hits[0].geo[1]
        assert dn == pytest.approx(12.0, abs=1.0)   # 120 pings * 0.1 m

    def test_threshold_monotone(self, sand_image):
        aug, _ = insert_random_contacts(sand_image, default_models(), 5,
                                        seed=2)
        counts = []
        for thr in (0.3, 0.5, 0.7):
            det = TemplateDetector(DetectorConfig.build(altitude=ALT,
                                                        threshold=thr))
            counts.append(len(det.detect(aug)))
        assert counts[0] >= counts[1] >= counts[2]

    def test_nms_spacing(self, sand_image, detector):
        aug, _ = insert_random_contacts(sand_image, default_models(), 6,
                                        seed=2)
        contacts = detector.detect(aug)
        r = detector.config.nms_radius
        for i in range(len(contacts)):
            for j in range(i + 1, len(contacts)):
                d = np.hypot(contacts[i].geo[0] - contacts[j].geo[0],
                             contacts[i].geo[1] - contacts[j].geo[1])
                assert d >= r - 1e-9

    def test_confidence_in_range(self, sand_image, detector):
        aug, _ = insert_random_contacts(sand_image, default_models(), 5,
                                        seed=2)
        for c in detector.detect(aug):
            assert 0.0 <= c.confidence <= 1.0


class TestConstantRateDetector:
    def _records(self, n):
        return [InsertionRecord("cylinder", 10 * i + 30, 15.0, 0.0,
                                geo=(15.0, float(i))) for i in range(n)]

    def test_p_one_detects_all(self, sand_image):
        det = ConstantRateDetector(1.0, seed=0)
        recs = self._records(5)
        assert len(det.detect(sand_image, truth=recs)) == 5

    def test_p_zero_detects_none(self, sand_image):
        det = ConstantRateDetector(0.0, seed=0)
        assert det.detect(sand_image, truth=self._records(5)) == []

    def test_invalid_p(self):
        with pytest.raises(ValueError):
            ConstantRateDetector(1.5)


def contact_at(e, n, conf=0.9):
    return Contact(ping=0, bin=0, geo=(e, n), confidence=conf)


class TestAssociate:
    def test_simple_match(self):
        recs = [InsertionRecord("cyl", 0, 10.0, 0.0, geo=(10.0, 0.0))]
        contacts = [contact_at(10.5, 0.0)]
        matches, fas = associate(contacts, recs, radius=2.0)
        assert matches == [(recs[0], contacts[0])]
        assert fas == []

    def test_miss_and_false_alarm(self):
        recs = [InsertionRecord("cyl", 0, 10.0, 0.0, geo=(10.0, 0.0))]
        contacts = [contact_at(30.0, 0.0)]
        matches, fas = associate(contacts, recs, radius=2.0)
        assert matches == [(recs[0], None)]
        assert fas == contacts

    def test_one_to_one_nearest_first(self):
        # Two contacts near one record: nearest wins, other is a false alarm.
        recs = [InsertionRecord("cyl", 0, 10.0, 0.0, geo=(10.0, 0.0))]
        near = contact_at(10.2, 0.0)
        far = contact_at(11.0, 0.0)
        matches, fas = associate([far, near], recs, radius=2.0)
        assert matches[0][1] is near
        assert fas == [far]

    def test_cross_assignment(self):
        # Greedy nearest-first resolves a shared-neighbour ambiguity.
        recs = [InsertionRecord("a", 0, 0, 0.0, geo=(0.0, 0.0)),
                InsertionRecord("b", 0, 0, 0.0, geo=(1.0, 0.0))]
        c0 = contact_at(0.1, 0.0)
        c1 = contact_at(0.9, 0.0)
        matches, fas = associate([c0, c1], recs, radius=2.0)
        assert matches[0][1] is c0
        assert matches[1][1] is c1
        assert fas == []

    def test_cardinality(self):
        recs = [InsertionRecord("r", 0, 0, 0.0, geo=(float(i), 0.0))
                for i in range(4)]
        contacts = [contact_at(0.1, 0.0), contact_at(2.05, 0.0),
                    contact_at(50.0, 0.0)]
        matches, fas = associate(contacts, recs, radius=1.0)
        assert len(matches) == len(recs)
        n_hit = sum(1 for _, c in matches if c is not None)
        assert n_hit + len(fas) == len(contacts)

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            associate([], [], radius=0.0)
