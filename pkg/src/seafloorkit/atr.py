"""Reference target detector and detection/insertion association.

The reference detector is classical: normalised cross-correlation of
highlight-then-shadow templates over the ground-range-corrected image,
followed by thresholding and geo non-maximum suppression. It is
deterministic, which keeps Monte-Carlo performance maps reproducible.
Any object with a ``detect(image) -> list[Contact]`` method can stand in.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy import ndimage

from .core import SidescanImage, estimate_altitude, geo_of
from .insertion import ObjectModel, _rotated_height, default_models


@dataclass(frozen=True)
class Contact:
    """One detector output."""

    ping: int
    bin: int
    geo: tuple[float, float]
    confidence: float
    label: str = "contact"

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


def ground_correct(image: SidescanImage, altitude: float | None = None):
    """Resample slant-range bins onto a uniform ground-range grid.

    Returns (ground image, ground resolution m). Columns inside the nadir
    gap are dropped; column j is ground range (j + 0.5) * resolution.
    """
    alt = altitude if altitude is not None else estimate_altitude(image)
    res = image.bin_resolution
    max_slant = image.bins * res
    max_ground = np.sqrt(max(max_slant ** 2 - alt ** 2, 0.0))
    n_ground = int(np.floor(max_ground / res))
    g = (np.arange(n_ground) + 0.5) * res
    s = np.hypot(g, alt)
    idx = s / res - 0.5
    i0 = np.clip(np.floor(idx).astype(int), 0, image.bins - 2)
    w = np.clip(idx - i0, 0.0, 1.0)
    ground = image.intensities[:, i0] * (1 - w) + image.intensities[:, i0 + 1] * w
    return ground, res


def make_template(model: ObjectModel, yaw: float, altitude: float,
                  reference_range: float, bin_resolution: float,
                  ping_resolution: float) -> tuple[np.ndarray, int]:
    """Idealised highlight+shadow contrast pattern in ground-range space.

    Background 0, sensor-facing visible object surface positive
    (cos-incidence weighted), shadow negative. Returns (template, column of
    the object centre) so detections localise on the object, not the
    object+shadow midpoint.
    """
    hf = _rotated_height(model, yaw)
    res = model.resolution
    half_along = hf.shape[0] * res / 2.0
    half_across = hf.shape[1] * res / 2.0
    h_max = float(hf.max())
    shadow_len = (reference_range + half_across) * h_max / (altitude - h_max)

    r0 = reference_range - half_across - 0.4
    r1 = reference_range + half_across + shadow_len + 0.4
    r = np.arange(r0, r1, bin_resolution)
    s = np.hypot(r, altitude)
    n_along = max(1, int(round(2 * half_along / ping_resolution))) + 2
    tmpl = np.zeros((n_along, r.size), dtype=np.float32)

    for i in range(n_along):
        dx = (i - (n_along - 1) / 2.0) * ping_resolution
        ix = (dx + half_along) / res - 0.5
        if ix < -0.5 or ix > hf.shape[0] - 0.5:
            continue
        row = hf[int(np.clip(round(ix), 0, hf.shape[0] - 1))]
        iy = (r - reference_range + half_across) / res - 0.5
        h = np.interp(iy, np.arange(hf.shape[1]), row, left=0.0, right=0.0)
        tang = (altitude - h) / np.maximum(r, 1e-6)
        visible = tang <= np.minimum.accumulate(tang) + 1e-12
        dh = np.gradient(h, r)
        cos_inc = (r * dh + (altitude - h)) / (np.maximum(s, 1e-6)
                                               * np.sqrt(1.0 + dh ** 2))
        cos_inc = np.clip(cos_inc, 0.0, 1.0)
        cos_flat = altitude / s
        on_object = h > 1e-4
        tmpl[i] = np.where(on_object & visible,
                           np.maximum(cos_inc - cos_flat, 0.1),
                           np.where(visible, 0.0, -0.5))
    center_col = int(round((reference_range - r0) / bin_resolution - 0.5))
    return tmpl, int(np.clip(center_col, 0, r.size - 1))


@dataclass
class DetectorConfig:
    """Template bank plus detection thresholds."""

    templates: list[tuple[str, np.ndarray, int]]  # (label, pattern, centre col)
    threshold: float = 0.4
    nms_radius: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.nms_radius <= 0:
            raise ValueError("nms_radius must be positive")
        if not self.templates:
            raise ValueError("template bank must be non-empty")

    @classmethod
    def build(cls, models: list[ObjectModel] | None = None,
              altitude: float = 10.0, reference_range: float = 8.0,
              bin_resolution: float = 0.05, ping_resolution: float = 0.1,
              yaws: tuple[float, ...] = (0.0, np.pi / 4, np.pi / 2),
              threshold: float = 0.4, nms_radius: float = 5.0):
        models = models or default_models()
        bank = []
        for m in models:
            for yaw in yaws:
                tmpl, cx = make_template(m, yaw, altitude, reference_range,
                                         bin_resolution, ping_resolution)
                bank.append((m.name, tmpl, cx))
        return cls(templates=bank, threshold=threshold, nms_radius=nms_radius)


class TemplateDetector:
    """NCC template detector over the ground-corrected image."""

    def __init__(self, config: DetectorConfig):
        self.config = config

    def detect(self, image: SidescanImage) -> list[Contact]:
        alt = estimate_altitude(image)
        ground, res = ground_correct(image, alt)
        g32 = ground.astype(np.float32)
        if g32.std() < 1e-9:
            return []

        best_score = None
        best_label = None
        for label, tmpl, cx in self.config.templates:
            if g32.shape[0] < tmpl.shape[0] or g32.shape[1] < tmpl.shape[1]:
                continue
            raw = cv2.matchTemplate(g32, tmpl, cv2.TM_CCOEFF_NORMED)
            raw = np.nan_to_num(raw, nan=-1.0, posinf=-1.0, neginf=-1.0)
            # Align scores on the object centre in a full-size frame.
            score = np.full(g32.shape, -1.0, dtype=np.float32)
            oy = tmpl.shape[0] // 2
            score[oy:oy + raw.shape[0], cx:cx + raw.shape[1]] = raw
            if best_score is None:
                best_score = score
                best_label = np.zeros(score.shape, dtype=np.int32)
                labels = [label]
            else:
                better = score > best_score
                best_score = np.where(better, score, best_score)
                if label not in labels:
                    labels.append(label)
                best_label[better] = labels.index(label)
        if best_score is None:
            return []

        rp = max(1, int(round(self.config.nms_radius
                              / image.ping_resolution)))
        rb = max(1, int(round(self.config.nms_radius / res)))
        local_max = best_score >= ndimage.maximum_filter(
            best_score, size=(2 * rp + 1, 2 * rb + 1))
        peaks = np.argwhere(local_max & (best_score > self.config.threshold))
        if peaks.size == 0:
            return []

        order = np.argsort(-best_score[peaks[:, 0], peaks[:, 1]], kind="stable")
        sign = float(image.across_sign(image.bins - 1))
        kept: list[Contact] = []
        kept_geo: list[tuple[float, float]] = []
        for k in order:
            p, j = int(peaks[k, 0]), int(peaks[k, 1])
            gr = (j + 0.5) * res
            geo = geo_of(image, p, gr, sign)
            if any(np.hypot(geo[0] - e, geo[1] - n) < self.config.nms_radius
                   for e, n in kept_geo):
                continue
            slant_bin = int(np.hypot(gr, alt) / image.bin_resolution)
            conf = float(np.clip(best_score[p, j], 0.0, 1.0))
            kept.append(Contact(ping=p, bin=min(slant_bin, image.bins - 1),
                                geo=geo, confidence=conf,
                                label=labels[int(best_label[p, j])]))
            kept_geo.append(geo)
        return kept


class ConstantRateDetector:
    """Test instrumentation: detects each true insertion with probability p.

    Needs the ground-truth records, so Monte-Carlo drivers feed them in via
    ``detect(image, truth=records)``.
    """

    needs_truth = True

    def __init__(self, p: float, seed: int = 0):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        self.p = p
        self._rng = np.random.default_rng(seed)

    def detect(self, image: SidescanImage, truth=None) -> list[Contact]:
        contacts = []
        for rec in truth or []:
            if self._rng.random() < self.p:
                slant_bin = int(np.hypot(rec.ground_range,
                                         estimate_altitude(image))
                                / image.bin_resolution)
                contacts.append(Contact(ping=rec.ping,
                                        bin=min(slant_bin, image.bins - 1),
                                        geo=rec.geo, confidence=1.0,
                                        label=rec.object_name))
        return contacts


def associate(contacts, insertions, radius: float = 2.0):
    """Greedy nearest-first one-to-one matching by geo distance.

    Returns (matches, false_alarms): matches is a list of
    (InsertionRecord, Contact or None); unmatched contacts are false alarms.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    pairs = []
    for ci, c in enumerate(contacts):
        for ii, r in enumerate(insertions):
            d = np.hypot(c.geo[0] - r.geo[0], c.geo[1] - r.geo[1])
            if d <= radius:
                pairs.append((d, ci, ii))
    pairs.sort(key=lambda t: (t[0], t[1], t[2]))
    matched_c: dict[int, int] = {}
    matched_i: dict[int, int] = {}
    for d, ci, ii in pairs:
        if ci in matched_c or ii in matched_i:
            continue
        matched_c[ci] = ii
        matched_i[ii] = ci
    matches = [(rec, contacts[matched_i[ii]] if ii in matched_i else None)
               for ii, rec in enumerate(insertions)]
    false_alarms = [c for ci, c in enumerate(contacts) if ci not in matched_c]
    return matches, false_alarms
