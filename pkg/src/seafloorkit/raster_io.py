"""PGM (P5) raster I/O with JSON sidecar metadata.

Intensities map linearly [0, 1] <-> [0, maxval] with maxval 65535 on write;
arbitrary maxval is accepted on read. The sidecar `<raster>.meta.json`
carries resolutions, altitude, side and per-ping navigation.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .core import SidescanImage
from .errors import RasterFormatError

MAXVAL = 65535


def write_pgm(matrix: np.ndarray, path) -> None:
    """Write a [0, 1] float matrix as a 16-bit binary PGM."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if m.min() < 0 or m.max() > 1:
        raise ValueError("matrix values must lie in [0, 1]")
    q = np.round(m * MAXVAL).astype(">u2")
    h, w = m.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{MAXVAL}\n".encode("ascii"))
        f.write(q.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM into a [0, 1] float matrix (any maxval rescaled)."""
    data = Path(path).read_bytes()
    # Header: magic, width, height, maxval separated by whitespace/comments.
    pos = 0
    tokens = []
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n|\S+)").match(data, pos)
        if m is None:
            raise RasterFormatError(f"{path}: truncated PGM header")
        pos = m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    if tokens[0] != b"P5":
        raise RasterFormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise RasterFormatError(f"{path}: non-numeric PGM header") from exc
    if w < 1 or h < 1 or maxval < 1 or maxval > 65535:
        raise RasterFormatError(f"{path}: invalid PGM dimensions/maxval")
    pos += 1  # single whitespace byte after maxval
    dtype = ">u2" if maxval > 255 else "u1"
    count = w * h
    raw = np.frombuffer(data, dtype=dtype, count=-1, offset=pos)
    if raw.size < count:
        raise RasterFormatError(f"{path}: pixel data truncated")
    return raw[:count].astype(np.float64).reshape(h, w) / maxval


def meta_path(raster_path) -> Path:
    return Path(str(raster_path) + ".meta.json")


def write_raster(matrix: np.ndarray, metadata: dict, path) -> None:
    """Write raster + sidecar; nav length must match the row count."""
    nav = metadata.get("nav")
    if nav is not None and len(nav) != np.asarray(matrix).shape[0]:
        raise RasterFormatError("sidecar nav length does not match ping count")
    write_pgm(matrix, path)
    meta_path(path).write_text(json.dumps(metadata, indent=2, sort_keys=True))


def read_raster(path) -> tuple[np.ndarray, dict]:
    matrix = read_pgm(path)
    mp = meta_path(path)
    metadata = json.loads(mp.read_text()) if mp.exists() else {}
    nav = metadata.get("nav")
    if nav is not None and len(nav) != matrix.shape[0]:
        raise RasterFormatError(f"{path}: sidecar nav length != ping count")
    return matrix, metadata


def image_metadata(image: SidescanImage) -> dict:
    return {
        "bin_resolution": image.bin_resolution,
        "ping_resolution": image.ping_resolution,
        "altitude": image.altitude,
        "side": image.side,
        "nav": [{"e": float(e), "n": float(n), "heading": float(h)}
                for e, n, h in image.nav],
    }


def save_image(image: SidescanImage, path) -> None:
    write_raster(image.intensities, image_metadata(image), path)


def load_image(path, image_id: str | None = None) -> SidescanImage:
    matrix, meta = read_raster(path)
    try:
        nav = np.array([[p["e"], p["n"], p["heading"]] for p in meta["nav"]])
        return SidescanImage(
            intensities=matrix,
            bin_resolution=meta["bin_resolution"],
            ping_resolution=meta["ping_resolution"],
            nav=nav,
            altitude=meta.get("altitude"),
            side=meta.get("side", "starboard"),
            image_id=image_id or Path(path).stem,
        )
    except KeyError as exc:
        raise RasterFormatError(f"{path}: sidecar missing field {exc}") from exc
