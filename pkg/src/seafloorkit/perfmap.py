"""Monte-Carlo detection-performance mapping.

Repeated random contact insertion, detection and association accumulate
per-cell (successes, trials) tallies; averaging gives a probability-of-
detection map, and unmatched detections give a false-alarm density.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .atr import associate
from .core import GeoGrid, SidescanImage, estimate_altitude, geo_of
from .errors import NoTrials
from .insertion import ObjectModel, insert_random_contacts


@dataclass(frozen=True)
class MonteCarloConfig:
    n_passes: int = 10
    contacts_per_pass: int = 10
    association_radius: float = 2.0
    cell_size: float = 5.0
    seed: int = 0
    min_separation: float | None = None
    keep_pass_maps: bool = False

    def __post_init__(self):
        if self.n_passes < 1 or self.contacts_per_pass < 1:
            raise ValueError("pass and contact counts must be >= 1")
        if self.association_radius <= 0 or self.cell_size <= 0:
            raise ValueError("radius and cell size must be positive")


@dataclass
class PerformanceMap:
    """Per-cell detection tallies plus overall false-alarm density."""

    successes: GeoGrid               # integer counts
    trials: GeoGrid                  # integer counts, same geometry
    fad: float                       # false alarms per hectare per pass
    n_passes: int
    false_alarm_count: int
    ensonified_area_m2: float
    pass_outcomes: list[list[tuple[float, float, bool]]] = field(
        default_factory=list)        # per pass: (e, n, detected)

    def pd_grid(self) -> GeoGrid:
        s = self.successes.values.astype(float)
        t = self.trials.values.astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            pd = np.where(t > 0, s / np.maximum(t, 1), np.nan)
        return GeoGrid(origin=self.successes.origin,
                       cell_size=self.successes.cell_size, values=pd)

    def mean_pd(self) -> float:
        t = self.trials.values
        if t.sum() == 0:
            raise NoTrials("no trials accumulated")
        return float(self.successes.values.sum() / t.sum())


def ensonified_area_m2(image: SidescanImage, altitude: float | None = None) -> float:
    """Ground-projected swath area: max ground range x track length."""
    alt = altitude if altitude is not None else estimate_altitude(image)
    max_slant = image.bins * image.bin_resolution
    max_ground = float(np.sqrt(max(max_slant ** 2 - alt ** 2, 0.0)))
    return max_ground * image.pings * image.ping_resolution


def _swath_grid(image: SidescanImage, cell_size: float) -> GeoGrid:
    alt = estimate_altitude(image)
    max_slant = image.bins * image.bin_resolution
    max_ground = np.sqrt(max(max_slant ** 2 - alt ** 2, 0.0))
    sign = float(image.across_sign(image.bins - 1))
    pts = []
    for p in range(0, image.pings, max(1, image.pings // 20)):
        pts.append(geo_of(image, p, 0.0, sign))
        pts.append(geo_of(image, p, max_ground, sign))
    pts.append(geo_of(image, image.pings - 1, 0.0, sign))
    pts.append(geo_of(image, image.pings - 1, max_ground, sign))
    return GeoGrid.covering(np.array(pts), cell_size, dtype=np.int64, nodata=-1)


def run_monte_carlo(image: SidescanImage, models: list[ObjectModel],
                    detector, config: MonteCarloConfig) -> PerformanceMap:
    """N passes of insert -> detect -> associate, tallied on a geo grid."""
    grid_s = _swath_grid(image, config.cell_size)
    grid_t = GeoGrid(origin=grid_s.origin, cell_size=grid_s.cell_size,
                     values=np.zeros_like(grid_s.values), nodata=-1)
    grid_s.values = np.zeros_like(grid_s.values)

    total_fa = 0
    pass_outcomes: list[list[tuple[float, float, bool]]] = []
    for p in range(config.n_passes):
        aug, records = insert_random_contacts(
            image, models, config.contacts_per_pass,
            min_separation=config.min_separation,
            seed=[config.seed, p], pass_id=p)
        if getattr(detector, "needs_truth", False):
            contacts = detector.detect(aug, truth=records)
        else:
            contacts = detector.detect(aug)
        matches, false_alarms = associate(contacts, records,
                                          config.association_radius)
        total_fa += len(false_alarms)
        outcomes = []
        for rec, contact in matches:
            ix, iy = grid_t.cell_of(*rec.geo)
            if grid_t.in_bounds(ix, iy):
                grid_t.values[iy, ix] += 1
                if contact is not None:
                    grid_s.values[iy, ix] += 1
            outcomes.append((rec.geo[0], rec.geo[1], contact is not None))
        if config.keep_pass_maps:
            pass_outcomes.append(outcomes)

    area = ensonified_area_m2(image)
    fad = total_fa / (area / 10_000.0 * config.n_passes)
    return PerformanceMap(successes=grid_s, trials=grid_t, fad=fad,
                          n_passes=config.n_passes, false_alarm_count=total_fa,
                          ensonified_area_m2=area, pass_outcomes=pass_outcomes)


def densify(pmap: PerformanceMap, k: int = 8, power: float = 2.0) -> GeoGrid:
    """Fill no-data PD cells by inverse-distance weighting from trialed cells."""
    pd = pmap.pd_grid()
    trialed = ~np.isnan(pd.values)
    if not trialed.any():
        raise NoTrials("performance map has no trialed cell")
    filled = pd.values.copy()
    missing = np.argwhere(np.isnan(pd.values))
    if missing.size:
        src = np.argwhere(trialed)
        src_vals = pd.values[trialed]
        tree = cKDTree(src)
        kk = min(k, len(src))
        dist, idx = tree.query(missing, k=kk)
        dist = np.atleast_2d(dist.T).T
        idx = np.atleast_2d(idx.T).T
        exact = dist[:, 0] < 1e-12
        w = 1.0 / np.maximum(dist, 1e-12) ** power
        est = (w * src_vals[idx]).sum(axis=1) / w.sum(axis=1)
        est[exact] = src_vals[idx[exact, 0]]
        filled[missing[:, 0], missing[:, 1]] = est
    return GeoGrid(origin=pd.origin, cell_size=pd.cell_size, values=filled)


def binarize(pd_grid: GeoGrid, threshold: float) -> GeoGrid:
    """Flag low-performance cells: PD strictly below threshold; no-data never."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    v = pd_grid.values
    flagged = np.where(np.isnan(v), False, v < threshold)
    return GeoGrid(origin=pd_grid.origin, cell_size=pd_grid.cell_size,
                   values=flagged.astype(bool), nodata=0)
