"""Synthetic contact insertion with geometrically-correct highlight and shadow.

Objects are 2.5-D parametric heightfields composited onto a locally-flat
seafloor at the estimated altitude. The affected ground-range interval of
each affected ping is re-swept by the same occlusion rule the renderer
uses, so shadow lengths follow L = R * h / (a - h). Inserted pixels are
rescaled to the local background ring statistics and re-speckled.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import SidescanImage, estimate_altitude, geo_of
from .errors import FootprintOutsideImage, InsideNadir, PlacementInfeasible
from .sim import SHADOW_FLOOR

DEFAULT_REFLECTIVITY = 0.9
DEFAULT_ATTENUATION = 0.03  # matches SensorModel.beam_attenuation


@dataclass(frozen=True)
class ObjectModel:
    """A target as a heightfield over its footprint (along x across, metres)."""

    name: str
    heightfield: np.ndarray      # (n_along, n_across), metres >= 0
    resolution: float            # m per heightfield cell

    def __post_init__(self):
        hf = np.asarray(self.heightfield, dtype=np.float64)
        object.__setattr__(self, "heightfield", hf)
        if hf.ndim != 2 or hf.size == 0:
            raise ValueError("heightfield must be a non-empty 2-D array")
        if hf.min() < 0:
            raise ValueError("heights must be non-negative")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @property
    def max_height(self) -> float:
        return float(self.heightfield.max())

    @property
    def length(self) -> float:
        return self.heightfield.shape[0] * self.resolution

    @property
    def width(self) -> float:
        return self.heightfield.shape[1] * self.resolution


def _footprint_grid(length: float, width: float, res: float):
    na = max(1, int(round(length / res)))
    nc = max(1, int(round(width / res)))
    dx = (np.arange(na) - (na - 1) / 2.0) * res   # along
    dy = (np.arange(nc) - (nc - 1) / 2.0) * res   # across
    return np.meshgrid(dx, dy, indexing="ij")


def cylinder(length: float = 2.0, diameter: float = 0.5,
             resolution: float = 0.05, name: str = "cylinder") -> ObjectModel:
    """Horizontal cylinder resting on the seafloor."""
    DX, DY = _footprint_grid(length, diameter, resolution)
    r = diameter / 2.0
    inside = np.abs(DY) <= r
    h = np.where(inside, r + np.sqrt(np.maximum(0.0, r ** 2 - DY ** 2)), 0.0)
    return ObjectModel(name=name, heightfield=h, resolution=resolution)


def sphere(diameter: float = 0.5, resolution: float = 0.05,
           name: str = "sphere") -> ObjectModel:
    DX, DY = _footprint_grid(diameter, diameter, resolution)
    rho2 = (DX ** 2 + DY ** 2) / (diameter / 2.0) ** 2
    h = diameter * np.sqrt(np.maximum(0.0, 1.0 - rho2))
    return ObjectModel(name=name, heightfield=h, resolution=resolution)


def truncated_cone(base_diameter: float = 1.0, top_diameter: float = 0.4,
                   height: float = 0.5, resolution: float = 0.05,
                   name: str = "truncated_cone") -> ObjectModel:
    DX, DY = _footprint_grid(base_diameter, base_diameter, resolution)
    rho = np.hypot(DX, DY)
    rb, rt = base_diameter / 2.0, top_diameter / 2.0
    ramp = np.clip((rb - rho) / max(rb - rt, 1e-9), 0.0, 1.0)
    return ObjectModel(name=name, heightfield=height * ramp, resolution=resolution)


def wedge(length: float = 1.5, width: float = 0.8, height: float = 0.5,
          resolution: float = 0.05, name: str = "wedge") -> ObjectModel:
    DX, DY = _footprint_grid(length, width, resolution)
    h = height * np.clip(1.0 - np.abs(DY) / (width / 2.0), 0.0, 1.0)
    return ObjectModel(name=name, heightfield=h, resolution=resolution)


def default_models() -> list[ObjectModel]:
    return [cylinder(), truncated_cone(), wedge()]


def flat_object(height: float, length: float = 2.0, width: float = 0.5,
                resolution: float = 0.05, name: str = "slab") -> ObjectModel:
    """Uniform-height block, handy for shadow-geometry tests."""
    na = max(1, int(round(length / resolution)))
    nc = max(1, int(round(width / resolution)))
    return ObjectModel(name=name, heightfield=np.full((na, nc), height),
                       resolution=resolution)


@dataclass(frozen=True)
class InsertionRecord:
    """Ground truth for one inserted contact."""

    object_name: str
    ping: int
    ground_range: float
    yaw: float
    pass_id: int = 0
    geo: tuple[float, float] = (0.0, 0.0)


def _rotated_height(model: ObjectModel, yaw: float) -> np.ndarray:
    if abs(yaw) < 1e-12:
        return model.heightfield
    deg = np.degrees(yaw)
    return np.maximum(
        ndimage.rotate(model.heightfield, deg, reshape=True, order=1,
                       mode="constant", cval=0.0), 0.0)


def _ring_stats(intensities: np.ndarray, p0: int, p1: int, b0: int, b1: int,
                margin: int = 12) -> tuple[float, float]:
    """Mean/std of the original pixels in an annulus around a pixel box."""
    pings, bins = intensities.shape
    P0, P1 = max(0, p0 - margin), min(pings, p1 + margin)
    B0, B1 = max(0, b0 - margin), min(bins, b1 + margin)
    block = intensities[P0:P1, B0:B1]
    mask = np.ones(block.shape, dtype=bool)
    mask[p0 - P0:p1 - P0, b0 - B0:b1 - B0] = False
    ring = block[mask]
    if ring.size == 0:
        return 0.3, 0.1
    return float(ring.mean()), float(ring.std())


def _composite(intensities: np.ndarray, image: SidescanImage, altitude: float,
               model: ObjectModel, ping: int, ground_range: float, yaw: float,
               rng: np.random.Generator,
               reflectivity: float = DEFAULT_REFLECTIVITY) -> None:
    """Write one contact into `intensities` in place."""
    hf = _rotated_height(model, yaw)
    res = model.resolution
    half_along = hf.shape[0] * res / 2.0
    half_across = hf.shape[1] * res / 2.0
    h_max = float(hf.max())
    if h_max >= altitude:
        raise FootprintOutsideImage("object taller than sensor altitude")
    if h_max <= 0.0:
        return  # zero-height object: identity

    r_lo = ground_range - half_across
    r_hi = ground_range + half_across
    if r_lo <= 0.25:
        raise InsideNadir("object footprint reaches the nadir ground point")
    max_slant = image.bins * image.bin_resolution
    max_ground = np.sqrt(max(max_slant ** 2 - altitude ** 2, 0.0))
    if r_hi >= max_ground:
        raise FootprintOutsideImage("object footprint beyond max range")

    p_half = max(1, int(round(half_along / image.ping_resolution)))
    p0, p1 = ping - p_half, ping + p_half + 1
    if p0 < 0 or p1 > image.pings:
        raise FootprintOutsideImage("object footprint outside ping range")

    shadow_len = r_hi * h_max / (altitude - h_max)
    r_start = max(0.3, r_lo - 0.5)
    r_end = min(max_ground, r_hi + shadow_len + 1.0)
    step = image.bin_resolution / 2.0
    r = np.arange(r_start, r_end, step)
    s = np.hypot(r, altitude)
    bins_of_r = np.floor(s / image.bin_resolution).astype(int)
    bins_of_r = np.clip(bins_of_r, 0, image.bins - 1)

    b_lo = int(np.floor(np.hypot(max(r_lo - 0.5, 0.0), altitude)
                        / image.bin_resolution))
    b_hi = int(np.ceil(np.hypot(r_end, altitude) / image.bin_resolution))
    mu_bg, sigma_bg = _ring_stats(intensities, p0, p1,
                                  max(0, b_lo), min(image.bins, b_hi))
    # Flat-ground reference level the highlight scales against.
    atten = np.exp(-DEFAULT_ATTENUATION * s)
    cos_flat = altitude / s
    ref_level = float(np.mean(cos_flat * atten))
    gain = mu_bg / max(ref_level, 1e-6)
    cov = float(np.clip(sigma_bg / max(mu_bg, 1e-6), 0.0, 1.0))

    for p in range(p0, p1):
        dx = (p - ping) * image.ping_resolution
        ix = (dx + half_along) / res - 0.5
        if ix < -0.5 or ix > hf.shape[0] - 0.5:
            continue
        row = hf[int(np.clip(round(ix), 0, hf.shape[0] - 1))]
        # Across profile on the sweep grid.
        iy = (r - ground_range + half_across) / res - 0.5
        h = np.interp(iy, np.arange(hf.shape[1]), row, left=0.0, right=0.0)

        tang = (altitude - h) / np.maximum(r, 1e-6)
        visible = tang <= np.minimum.accumulate(tang) + 1e-12
        on_object = h > 1e-4

        dh = np.gradient(h, r)
        cos_inc = (r * dh + (altitude - h)) / (np.maximum(s, 1e-6)
                                               * np.sqrt(1.0 + dh ** 2))
        cos_inc = np.clip(cos_inc, 0.0, 1.0)
        highlight = gain * reflectivity * cos_inc * atten

        hl_sample = on_object & visible
        sh_sample = ~visible
        for b in np.unique(bins_of_r):
            sel = bins_of_r == b
            if hl_sample[sel].any():
                v = float(highlight[sel][hl_sample[sel]].mean())
            elif sh_sample[sel].sum() * 2 >= sel.sum():
                v = SHADOW_FLOOR
            else:
                continue
            noise = (1.0 - cov) + cov * rng.exponential(1.0)
            intensities[p, b] = np.clip(v * noise, 0.0, 1.0)


def insert_contact(image: SidescanImage, model: ObjectModel,
                   at: tuple[int, float], yaw: float = 0.0, seed: int = 0,
                   pass_id: int = 0,
                   reflectivity: float = DEFAULT_REFLECTIVITY):
    """Insert one contact; returns (augmented image, InsertionRecord)."""
    altitude = estimate_altitude(image)
    out = image.intensities.copy()
    rng = np.random.default_rng(seed)
    ping, ground_range = int(at[0]), float(at[1])
    _composite(out, image, altitude, model, ping, ground_range, yaw, rng,
               reflectivity)
    geo = geo_of(image, ping, ground_range,
                 float(image.across_sign(image.bins - 1)))
    rec = InsertionRecord(object_name=model.name, ping=ping,
                          ground_range=ground_range, yaw=yaw,
                          pass_id=pass_id, geo=geo)
    aug = SidescanImage(intensities=out, bin_resolution=image.bin_resolution,
                        ping_resolution=image.ping_resolution, nav=image.nav,
                        altitude=image.altitude, side=image.side,
                        image_id=image.image_id)
    return aug, rec


def insert_random_contacts(image: SidescanImage, models: list[ObjectModel],
                           count: int, min_separation: float | None = None,
                           seed: int = 0, pass_id: int = 0,
                           edge_margin_m: float = 2.0,
                           reflectivity: float = DEFAULT_REFLECTIVITY):
    """Insert `count` contacts at uniform random ensonified locations.

    Locations are rejection-sampled to keep pairwise geo separation at or
    above `min_separation` (default: twice the longest object).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not models:
        raise ValueError("need at least one object model")
    if min_separation is None:
        min_separation = 2.0 * max(m.length for m in models)

    altitude = estimate_altitude(image)
    max_slant = image.bins * image.bin_resolution
    max_ground = np.sqrt(max(max_slant ** 2 - altitude ** 2, 0.0))
    widest = max(m.width for m in models)
    longest = max(m.length for m in models)
    r_min = widest / 2.0 + 0.6
    r_max = max_ground - widest / 2.0 - edge_margin_m
    p_margin = int(np.ceil(longest / image.ping_resolution)) + 1
    if r_max <= r_min or image.pings <= 2 * p_margin:
        raise PlacementInfeasible("image too small for any placement")

    rng = np.random.default_rng(seed)
    out = image.intensities.copy()
    records: list[InsertionRecord] = []
    placed_geo: list[tuple[float, float]] = []
    sign = float(image.across_sign(image.bins - 1))

    attempts = 0
    budget = 200 * count + 1000
    while len(records) < count:
        attempts += 1
        if attempts > budget:
            raise PlacementInfeasible(
                f"placed {len(records)}/{count} within retry budget")
        model = models[int(rng.integers(len(models)))]
        ping = int(rng.integers(p_margin, image.pings - p_margin))
        gr = float(rng.uniform(r_min, r_max))
        yaw = float(rng.uniform(0.0, np.pi))
        geo = geo_of(image, ping, gr, sign)
        if any(np.hypot(geo[0] - ge, geo[1] - gn) < min_separation
               for ge, gn in placed_geo):
            continue
        try:
            _composite(out, image, altitude, model, ping, gr, yaw, rng,
                       reflectivity)
        except (FootprintOutsideImage, InsideNadir):
            continue
        records.append(InsertionRecord(object_name=model.name, ping=ping,
                                       ground_range=gr, yaw=yaw,
                                       pass_id=pass_id, geo=geo))
        placed_geo.append(geo)

    aug = SidescanImage(intensities=out, bin_resolution=image.bin_resolution,
                        ping_resolution=image.ping_resolution, nav=image.nav,
                        altitude=image.altitude, side=image.side,
                        image_id=image.image_id)
    return aug, records
