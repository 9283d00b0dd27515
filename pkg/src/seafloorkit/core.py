"""Core sidescan raster, geometry and snippet types.

Conventions: intensity rasters are ping-major float arrays in [0, 1]
(rows = pings along track, columns = slant-range bins). Headings are
radians clockwise from north; positions are (easting, northing) metres.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from .errors import ImageTooSmall, InsideNadir, NoFirstReturn

Side = Literal["port", "starboard", "full"]

# First-return detector defaults (altitude estimation).
FIRST_RETURN_THRESHOLD = 0.1
FIRST_RETURN_RUN = 3


@dataclass(frozen=True)
class SidescanImage:
    """A single-sided (or full-swath) sidescan intensity raster with navigation."""

    intensities: np.ndarray          # (pings, bins), float in [0, 1]
    bin_resolution: float            # m per slant-range bin
    ping_resolution: float           # m along track per ping
    nav: np.ndarray                  # (pings, 3): easting, northing, heading
    altitude: float | None = None    # m above seafloor; None = estimate from data
    side: Side = "starboard"
    image_id: str = "sidescan"

    def __post_init__(self):
        inten = np.asarray(self.intensities, dtype=np.float64)
        nav = np.asarray(self.nav, dtype=np.float64)
        object.__setattr__(self, "intensities", inten)
        object.__setattr__(self, "nav", nav)
        if inten.ndim != 2 or inten.shape[0] < 1 or inten.shape[1] < 1:
            raise ValueError("intensities must be a non-empty 2-D array")
        if self.bin_resolution <= 0 or self.ping_resolution <= 0:
            raise ValueError("resolutions must be positive")
        if inten.min() < 0.0 or inten.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        if nav.shape != (inten.shape[0], 3):
            raise ValueError("nav must have one (e, n, heading) row per ping")
        if self.altitude is not None and self.altitude <= 0:
            raise ValueError("altitude must be positive")

    @property
    def pings(self) -> int:
        return self.intensities.shape[0]

    @property
    def bins(self) -> int:
        return self.intensities.shape[1]

    def slant_of_bin(self, bin_index) -> np.ndarray:
        """Slant range at bin centre; for full-swath images, distance from nadir column."""
        b = np.asarray(bin_index, dtype=np.float64)
        if self.side == "full":
            b = np.abs(b - self.bins / 2.0)
        return (b + 0.5) * self.bin_resolution

    def across_sign(self, bin_index) -> np.ndarray:
        """+1 toward starboard, -1 toward port for the given bin."""
        if self.side == "starboard":
            return np.ones_like(np.asarray(bin_index, dtype=np.float64))
        if self.side == "port":
            return -np.ones_like(np.asarray(bin_index, dtype=np.float64))
        return np.where(np.asarray(bin_index) >= self.bins / 2.0, 1.0, -1.0)


def slant_to_ground(slant_range: float, altitude: float) -> float:
    """Project a slant range onto the seafloor assuming a locally flat bottom."""
    if altitude <= 0:
        raise ValueError("altitude must be positive")
    if slant_range < 0:
        raise ValueError("slant_range must be non-negative")
    if slant_range < altitude:
        raise InsideNadir(
            f"slant range {slant_range:.3f} m is inside the nadir gap "
            f"(altitude {altitude:.3f} m)")
    return float(np.sqrt(slant_range ** 2 - altitude ** 2))


def ground_to_slant(ground_range: float, altitude: float) -> float:
    return float(np.hypot(ground_range, altitude))


def estimate_altitude(image: SidescanImage,
                      threshold: float = FIRST_RETURN_THRESHOLD,
                      run: int = FIRST_RETURN_RUN) -> float:
    """Sensor altitude from the first bottom return, median over pings.

    Metadata altitude, when present, is returned unchanged. The first return
    is the earliest bin where intensity exceeds `threshold` for `run`
    consecutive bins (robust to isolated speckle spikes).
    """
    if image.altitude is not None:
        return float(image.altitude)
    mask = image.intensities > threshold
    if run > 1:
        sustained = mask[:, : mask.shape[1] - run + 1].copy()
        for k in range(1, run):
            sustained &= mask[:, k: mask.shape[1] - run + 1 + k]
    else:
        sustained = mask
    has_return = sustained.any(axis=1)
    if not has_return.any():
        raise NoFirstReturn("no ping crosses the first-return threshold")
    first_bins = np.argmax(sustained[has_return], axis=1)
    return float(np.median(first_bins) * image.bin_resolution)


@dataclass(frozen=True)
class SnippetSpec:
    """Square snippet geometry for terrain classification.

    gain_compensation: residual attenuation coefficient (1/m) used to
    flatten the range-dependent gain before texture analysis; None = off.
    """

    side_m: float = 3.0
    stride_m: float = 3.0
    exclude_nadir: bool = True
    gain_compensation: float | None = 0.03

    def __post_init__(self):
        if self.side_m <= 0 or self.stride_m <= 0:
            raise ValueError("side_m and stride_m must be positive")

    def window_shape(self, image: SidescanImage) -> tuple[int, int]:
        """(pings, bins) pixel window for this image's resolutions."""
        n_pings = max(1, round(self.side_m / image.ping_resolution))
        n_bins = max(1, round(self.side_m / image.bin_resolution))
        return n_pings, n_bins


@dataclass(frozen=True)
class Snippet:
    """A square image patch, the unit of terrain classification."""

    pixels: np.ndarray               # (pings, bins) slice, float in [0, 1]
    origin: tuple[int, int]          # (ping index, bin index) of the window corner
    geo_center: tuple[float, float]  # (easting, northing) m
    source_image: str = "sidescan"


def _across_unit(heading: float) -> tuple[float, float]:
    """Unit vector pointing starboard for a given heading (rad from north)."""
    # Track = (sin h, cos h); rotate clockwise 90 deg -> (cos h, -sin h).
    return float(np.cos(heading)), float(-np.sin(heading))


def geo_of(image: SidescanImage, ping: float, ground_range: float,
           sign: float = 1.0) -> tuple[float, float]:
    """Geo location of the seafloor point `ground_range` m abeam of ping `ping`."""
    p = int(np.clip(round(ping), 0, image.pings - 1))
    e, n, heading = image.nav[p]
    ae, an = _across_unit(heading)
    return float(e + sign * ground_range * ae), float(n + sign * ground_range * an)


def extract_snippets(image: SidescanImage, spec: SnippetSpec,
                     mode: str = "grid", n: int = 0,
                     seed: int | None = None) -> list[Snippet]:
    """Cut square snippets out of an image, on a grid or at random.

    Random mode draws `n` windows uniformly over valid origins and is
    reproducible for a fixed seed. With `spec.exclude_nadir`, windows whose
    near edge falls inside the nadir gap are rejected.
    """
    win_p, win_b = spec.window_shape(image)
    if image.pings < win_p or image.bins < win_b:
        raise ImageTooSmall(
            f"image {image.pings}x{image.bins} cannot hold a "
            f"{win_p}x{win_b} snippet window")

    min_bin = 0
    if spec.exclude_nadir and image.side != "full":
        alt = estimate_altitude(image)
        min_bin = int(np.ceil(alt / image.bin_resolution))
        if image.bins - min_bin < win_b:
            raise ImageTooSmall("no room outside the nadir gap")

    origins: list[tuple[int, int]] = []
    if mode == "grid":
        stride_p = max(1, round(spec.stride_m / image.ping_resolution))
        stride_b = max(1, round(spec.stride_m / image.bin_resolution))
        for p0 in range(0, image.pings - win_p + 1, stride_p):
            for b0 in range(min_bin, image.bins - win_b + 1, stride_b):
                origins.append((p0, b0))
    elif mode == "random":
        rng = np.random.default_rng(seed)
        ps = rng.integers(0, image.pings - win_p + 1, size=n)
        bs = rng.integers(min_bin, image.bins - win_b + 1, size=n)
        origins = list(zip(ps.tolist(), bs.tolist()))
    else:
        raise ValueError(f"unknown snippet mode {mode!r}")

    gain = None
    if spec.gain_compensation is not None:
        alt = image.altitude if image.altitude is not None else estimate_altitude(image)
        s_all = image.slant_of_bin(np.arange(image.bins))
        with np.errstate(divide="ignore", invalid="ignore"):
            g = (alt / np.maximum(s_all, alt)) \
                * np.exp(-spec.gain_compensation * s_all)
        gain = g / g.max()

    snippets = []
    for p0, b0 in origins:
        pixels = image.intensities[p0:p0 + win_p, b0:b0 + win_b]
        if gain is not None:
            pixels = np.clip(pixels / gain[b0:b0 + win_b], 0.0, 1.0)
        center_bin = b0 + (win_b - 1) / 2.0
        slant = image.slant_of_bin(center_bin)
        alt = image.altitude if image.altitude is not None else None
        if alt is not None and slant >= alt:
            gr = float(np.sqrt(slant ** 2 - alt ** 2))
        else:
            gr = float(slant)  # nadir-inclusive or unknown altitude: slant fallback
        sign = float(image.across_sign(center_bin))
        geo = geo_of(image, p0 + (win_p - 1) / 2.0, gr, sign)
        snippets.append(Snippet(pixels=pixels, origin=(p0, b0),
                                geo_center=geo, source_image=image.image_id))
    return snippets


NODATA = float("nan")


@dataclass
class GeoGrid:
    """Axis-aligned geo-referenced grid of per-cell values.

    Float payloads use NaN as the no-data sentinel; integer payloads use -1.
    """

    origin: tuple[float, float]      # (easting, northing) of the lower-left corner
    cell_size: float
    values: np.ndarray               # (height, width), row 0 = southmost
    nodata: float = NODATA

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")

    @classmethod
    def empty(cls, origin, cell_size, width, height, dtype=float, nodata=NODATA):
        fill = nodata if np.issubdtype(np.dtype(dtype), np.floating) else int(nodata)
        values = np.full((height, width), fill, dtype=dtype)
        return cls(origin=origin, cell_size=cell_size, values=values, nodata=nodata)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def cell_of(self, e: float, n: float) -> tuple[int, int]:
        """(ix, iy) cell containing a geo point; may be out of bounds."""
        ix = int(np.floor((e - self.origin[0]) / self.cell_size))
        iy = int(np.floor((n - self.origin[1]) / self.cell_size))
        return ix, iy

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def center_of(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin[0] + (ix + 0.5) * self.cell_size,
                self.origin[1] + (iy + 0.5) * self.cell_size)

    def is_nodata(self) -> np.ndarray:
        if np.issubdtype(self.values.dtype, np.floating):
            return np.isnan(self.values)
        return self.values == self.nodata

    def iter_cells(self) -> Iterator[tuple[int, int]]:
        for iy in range(self.height):
            for ix in range(self.width):
                yield ix, iy

    @classmethod
    def covering(cls, points: np.ndarray, cell_size: float,
                 dtype=float, nodata=NODATA) -> "GeoGrid":
        """Smallest grid whose cells cover all (e, n) points."""
        pts = np.asarray(points, dtype=float)
        e0 = np.floor(pts[:, 0].min() / cell_size) * cell_size
        n0 = np.floor(pts[:, 1].min() / cell_size) * cell_size
        w = int(np.floor((pts[:, 0].max() - e0) / cell_size)) + 1
        h = int(np.floor((pts[:, 1].max() - n0) / cell_size)) + 1
        return cls.empty((e0, n0), cell_size, w, h, dtype=dtype, nodata=nodata)
