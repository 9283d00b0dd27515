"""Synthetic seafloor terrains and a physically-plausible sidescan renderer.

Six terrain archetypes (flat_sand, mud, sand_ripples, clutter, marine_growth,
rock_outcrop) are synthesised as height + reflectivity fields, then imaged by
a per-ping occlusion ray sweep with Lambertian returns, residual range
attenuation, multiplicative speckle and an additive noise floor.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import SidescanImage, _across_unit
from .errors import InvalidParams, TrajectoryOutOfBounds, UnknownClass

TERRAIN_CLASSES = [
    (0, "flat_sand"),
    (1, "mud"),
    (2, "sand_ripples"),
    (3, "clutter"),
    (4, "marine_growth"),
    (5, "rock_outcrop"),
]
CLASS_IDS = {name: cid for cid, name in TERRAIN_CLASSES}
CLASS_NAMES = {cid: name for cid, name in TERRAIN_CLASSES}

NADIR_TRUTH = -1
SHADOW_FLOOR = 0.02


@dataclass(frozen=True)
class SensorModel:
    """Sidescan sensor geometry and noise parameters."""

    altitude: float = 10.0            # m above the seafloor reference plane
    max_slant_range: float = 40.0     # m
    bin_resolution: float = 0.05      # m per slant bin
    ping_resolution: float = 0.1      # m along track
    speckle_strength: float = 0.35    # 0 = noiseless, 1 = fully-developed speckle
    beam_attenuation: float = 0.03    # residual attenuation after TVG, 1/m
    noise_floor: float = 0.02         # additive sensor noise (std)

    def __post_init__(self):
        if self.max_slant_range <= self.altitude:
            raise ValueError("max_slant_range must exceed altitude")
        if self.speckle_strength < 0 or self.beam_attenuation < 0:
            raise ValueError("noise parameters must be non-negative")

    @property
    def bins(self) -> int:
        return int(round(self.max_slant_range / self.bin_resolution))


@dataclass
class TerrainPatch:
    """Ground-truth seafloor: height, reflectivity and class per cell."""

    origin: tuple[float, float]       # (easting, northing) of the SW corner
    cell_size: float                  # m
    heightfield: np.ndarray           # (ny, nx), metres; row 0 = southmost
    backscatter: np.ndarray           # (ny, nx), reflectivity in [0, 1]
    truth: np.ndarray                 # (ny, nx), class id
    class_catalog: list[tuple[int, str]] = field(
        default_factory=lambda: list(TERRAIN_CLASSES))
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.heightfield.shape == self.backscatter.shape == self.truth.shape):
            raise ValueError("heightfield, backscatter and truth must share shape")
        valid = {cid for cid, _ in self.class_catalog}
        if not set(np.unique(self.truth)).issubset(valid):
            raise ValueError("truth ids outside class catalog")

    @property
    def extent(self) -> tuple[float, float]:
        """(width_m, height_m)."""
        ny, nx = self.heightfield.shape
        return nx * self.cell_size, ny * self.cell_size

    def contains(self, e: np.ndarray, n: np.ndarray) -> np.ndarray:
        w, h = self.extent
        return ((e >= self.origin[0]) & (e <= self.origin[0] + w)
                & (n >= self.origin[1]) & (n <= self.origin[1] + h))

    def sample(self, e: np.ndarray, n: np.ndarray):
        """Bilinear height/backscatter and nearest truth at geo points."""
        x = (np.asarray(e) - self.origin[0]) / self.cell_size - 0.5
        y = (np.asarray(n) - self.origin[1]) / self.cell_size - 0.5
        coords = np.vstack([y.ravel(), x.ravel()])
        h = ndimage.map_coordinates(self.heightfield, coords, order=1,
                                    mode="nearest").reshape(np.shape(e))
        b = ndimage.map_coordinates(self.backscatter, coords, order=1,
                                    mode="nearest").reshape(np.shape(e))
        t = ndimage.map_coordinates(self.truth, coords, order=0,
                                    mode="nearest").reshape(np.shape(e))
        return h, b, t


def _value_noise(shape, scale_cells: float, rng, octaves: int = 1) -> np.ndarray:
    """Smooth multi-octave value noise in roughly [-1, 1]."""
    ny, nx = shape
    out = np.zeros(shape)
    amp, total = 1.0, 0.0
    for o in range(octaves):
        s = max(2.0, scale_cells / (2 ** o))
        gy, gx = max(2, int(np.ceil(ny / s)) + 1), max(2, int(np.ceil(nx / s)) + 1)
        grid = rng.standard_normal((gy, gx))
        zoomed = ndimage.zoom(grid, (ny / gy, nx / gx), order=3, mode="nearest")
        out += amp * zoomed[:ny, :nx]
        total += amp
        amp *= 0.5
    out /= total
    return out / max(1e-9, np.abs(out).std() * 3.0)


def generate_terrain(terrain_class, extent: tuple[float, float],
                     params: dict | None = None, seed: int = 0,
                     cell_size: float = 0.2,
                     origin: tuple[float, float] = (0.0, 0.0)) -> TerrainPatch:
    """Synthesise one archetype terrain over a (width_m, height_m) extent."""
    if isinstance(terrain_class, str):
        if terrain_class not in CLASS_IDS:
            raise UnknownClass(terrain_class)
        cid = CLASS_IDS[terrain_class]
    else:
        if terrain_class not in CLASS_NAMES:
            raise UnknownClass(str(terrain_class))
        cid = int(terrain_class)
    name = CLASS_NAMES[cid]
    params = dict(params or {})
    if extent[0] <= 0 or extent[1] <= 0:
        raise InvalidParams("extent must be positive")

    nx = max(2, int(round(extent[0] / cell_size)))
    ny = max(2, int(round(extent[1] / cell_size)))
    rng = np.random.default_rng(seed)
    xs = (np.arange(nx) + 0.5) * cell_size
    ys = (np.arange(ny) + 0.5) * cell_size
    X, Y = np.meshgrid(xs, ys)
    meta: dict = {"class": name, "seed": seed}

    if name == "flat_sand":
        height = 0.004 * _value_noise((ny, nx), 10, rng, octaves=2)
        back = 0.55 + 0.05 * _value_noise((ny, nx), 6, rng, octaves=2)
    elif name == "mud":
        height = 0.002 * _value_noise((ny, nx), 40, rng)
        back = 0.16 + 0.015 * _value_noise((ny, nx), 30, rng)
    elif name == "sand_ripples":
        wavelength = float(params.get("wavelength", 1.0))
        orientation = float(params.get("orientation", 0.0))  # crest direction, rad
        amplitude = float(params.get("amplitude", 0.06))
        if wavelength <= 0:
            raise InvalidParams("ripple wavelength must be positive")
        u = X * np.cos(orientation) + Y * np.sin(orientation)
        phase = 2 * np.pi * u / wavelength
        jitter = 0.6 * _value_noise((ny, nx), 60, rng)
        height = amplitude * np.sin(phase + jitter)
        back = 0.5 + 0.2 * np.sin(phase + jitter) \
            + 0.04 * _value_noise((ny, nx), 6, rng, octaves=2)
    elif name == "clutter":
        density = float(params.get("density", 0.25))  # rocks / m^2
        if density < 0:
            raise InvalidParams("clutter density must be non-negative")
        area = extent[0] * extent[1]
        n_rocks = int(rng.poisson(density * area))
        height = 0.004 * _value_noise((ny, nx), 10, rng, octaves=2)
        back = 0.45 + 0.04 * _value_noise((ny, nx), 8, rng, octaves=2)
        cx = rng.uniform(0, extent[0], n_rocks)
        cy = rng.uniform(0, extent[1], n_rocks)
        hgt = rng.uniform(0.2, 0.45, n_rocks)
        rad = rng.uniform(0.2, 0.5, n_rocks)
        for k in range(n_rocks):
            d2 = ((X - cx[k]) ** 2 + (Y - cy[k]) ** 2) / rad[k] ** 2
            bump = np.where(d2 < 4.0, hgt[k] * np.exp(-d2), 0.0)
            height = np.maximum(height, bump)
            back = np.where(d2 < 1.5, np.maximum(back, 0.8), back)
        meta["n_rocks"] = n_rocks
    elif name == "marine_growth":
        patches = _value_noise((ny, nx), 12, rng, octaves=4)
        mask = patches > np.quantile(patches, 0.25)
        fine = _value_noise((ny, nx), 4, rng, octaves=3)
        height = np.where(mask, 0.10 + 0.35 * np.clip(patches, 0, 1)
                          + 0.12 * fine, 0.0)
        height = np.clip(height, 0.0, None)
        back = np.where(mask, 0.30 + 0.45 * np.clip(fine + 0.5, 0, 1), 0.5)
        back += 0.05 * _value_noise((ny, nx), 3, rng, octaves=2)
    elif name == "rock_outcrop":
        ridges = np.abs(_value_noise((ny, nx), 40, rng, octaves=2))
        height = 1.8 * ridges
        back = 0.55 + 0.3 * ridges + 0.06 * _value_noise((ny, nx), 5, rng, octaves=2)
    else:  # pragma: no cover
        raise UnknownClass(name)

    back = np.clip(back, 0.02, 1.0)
    truth = np.full((ny, nx), cid, dtype=np.int16)
    return TerrainPatch(origin=origin, cell_size=cell_size, heightfield=height,
                        backscatter=back, truth=truth, meta=meta)


def _ping_rng(seed: int, ping: int) -> np.random.Generator:
    # Counter-seeded so parallel and serial renders match bit for bit.
    return np.random.default_rng([seed, ping])


def render_sidescan(terrain: TerrainPatch, trajectory: np.ndarray,
                    sensor: SensorModel, seed: int = 0,
                    side: str = "starboard",
                    image_id: str = "sidescan"):
    """Render a sidescan image plus per-pixel truth from a terrain.

    Each ping casts a 1-D occlusion sweep across ground range: cells behind
    a higher grazing tangent are shadowed; visible cells get a Lambertian
    return with residual range attenuation, speckle and additive noise.
    Returns (SidescanImage, truth raster with -1 in nadir/off-terrain).
    """
    traj = np.asarray(trajectory, dtype=np.float64)
    if traj.ndim != 2 or traj.shape[1] != 3:
        raise ValueError("trajectory must be (pings, 3) of (e, n, heading)")
    pings = traj.shape[0]
    bins = sensor.bins
    alt = sensor.altitude
    sign = 1.0 if side == "starboard" else -1.0

    slant = (np.arange(bins) + 0.5) * sensor.bin_resolution
    ensonified = slant >= alt
    ground = np.zeros(bins)
    ground[ensonified] = np.sqrt(slant[ensonified] ** 2 - alt ** 2)

    intensities = np.zeros((pings, bins))
    truth = np.full((pings, bins), NADIR_TRUTH, dtype=np.int16)

    for p in range(pings):
        e0, n0, heading = traj[p]
        ae, an = _across_unit(heading)
        pe = e0 + sign * ground[ensonified] * ae
        pn = n0 + sign * ground[ensonified] * an
        if not terrain.contains(pe, pn).all():
            raise TrajectoryOutOfBounds(
                f"ping {p}: swath leaves the terrain extent")
        h, b, t = terrain.sample(pe, pn)
        r = ground[ensonified]
        s = slant[ensonified]

        # Occlusion sweep: running minimum of the grazing tangent.
        tang = (alt - h) / np.maximum(r, 1e-6)
        visible = tang <= np.minimum.accumulate(tang) + 1e-12

        # Lambertian return with local across-track slope.
        dh = np.gradient(h, r)
        cos_inc = (r * dh + (alt - h)) / (np.maximum(s, 1e-6)
                                          * np.sqrt(1.0 + dh ** 2))
        cos_inc = np.clip(cos_inc, 0.0, 1.0)
        signal = b * cos_inc * np.exp(-sensor.beam_attenuation * s)
        signal = np.where(visible, signal, SHADOW_FLOOR)

        rng = _ping_rng(seed, p)
        if sensor.speckle_strength > 0:
            noise = (1.0 - sensor.speckle_strength) \
                + sensor.speckle_strength * rng.exponential(1.0, signal.shape)
            signal = signal * noise
        if sensor.noise_floor > 0:
            signal = signal + rng.normal(0.0, sensor.noise_floor, signal.shape)

        intensities[p, ensonified] = np.clip(signal, 0.0, 1.0)
        truth[p, ensonified] = t

    image = SidescanImage(
        intensities=intensities,
        bin_resolution=sensor.bin_resolution,
        ping_resolution=sensor.ping_resolution,
        nav=traj,
        altitude=alt,
        side=side,
        image_id=image_id,
    )
    return image, truth


def straight_trajectory(start: tuple[float, float], heading: float,
                        length_m: float, ping_resolution: float) -> np.ndarray:
    """Constant-heading track sampled every ping_resolution metres."""
    n = max(1, int(round(length_m / ping_resolution)))
    d = np.arange(n) * ping_resolution
    te, tn = np.sin(heading), np.cos(heading)
    return np.column_stack([start[0] + d * te, start[1] + d * tn,
                            np.full(n, heading)])


def generate_mission_set(seed: int = 0, sensor: SensorModel | None = None,
                         mission_length_m: float = 60.0,
                         terrain_params: dict | None = None):
    """One straight-line mission per archetype with a shared sensor.

    Returns (missions, manifest) where missions is a list of
    (class_name, SidescanImage, truth raster).
    """
    sensor = sensor or SensorModel()
    max_ground = np.sqrt(sensor.max_slant_range ** 2 - sensor.altitude ** 2)
    extent = (max_ground + 4.0, mission_length_m + 4.0)
    missions = []
    manifest = {
        "seed": seed,
        "sensor": {
            "altitude": sensor.altitude,
            "max_slant_range": sensor.max_slant_range,
            "bin_resolution": sensor.bin_resolution,
            "ping_resolution": sensor.ping_resolution,
            "speckle_strength": sensor.speckle_strength,
            "beam_attenuation": sensor.beam_attenuation,
            "noise_floor": sensor.noise_floor,
        },
        "missions": [],
    }
    for cid, name in TERRAIN_CLASSES:
        terrain = generate_terrain(
            name, extent, (terrain_params or {}).get(name),
            seed=seed * 1000 + cid, origin=(0.0, -2.0))
        traj = straight_trajectory((0.0, 0.0), 0.0, mission_length_m,
                                   sensor.ping_resolution)
        image, truth = render_sidescan(terrain, traj, sensor,
                                       seed=seed * 100 + cid,
                                       image_id=f"mission_{name}")
        missions.append((name, image, truth))
        manifest["missions"].append({"class": name, "class_id": cid,
                                     "pings": image.pings, "bins": image.bins})
    return missions, manifest
