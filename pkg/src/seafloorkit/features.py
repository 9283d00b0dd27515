"""Hand-crafted texture features for seafloor snippets.

Default pluggable extractor: intensity statistics, grey-level co-occurrence
measures at two offsets x two orientations, a gradient-orientation
histogram and multi-scale variance. Deterministic, and DC-offset invariant
for the contrast-type features (per-snippet min-max quantisation).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import Snippet
from .errors import DegenerateSnippet

GLCM_LEVELS = 16
GLCM_OFFSETS = (1, 2)          # pixel distances
GLCM_PROPS = ("contrast", "homogeneity", "entropy")


@dataclass(frozen=True)
class ExtractorConfig:
    """Configuration of the default texture-bank extractor."""

    extractor_id: str = "texture_bank_v1"
    glcm_levels: int = GLCM_LEVELS
    glcm_offsets: tuple[int, ...] = GLCM_OFFSETS
    orientation_bins: int = 8
    scales: tuple[int, ...] = (2, 4)
    presmooth: int = 3             # speckle-suppression mean filter, 0 = off

    def config_hash(self) -> str:
        payload = json.dumps({
            "id": self.extractor_id,
            "levels": self.glcm_levels,
            "offsets": list(self.glcm_offsets),
            "orient_bins": self.orientation_bins,
            "scales": list(self.scales),
            "presmooth": self.presmooth,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @property
    def length(self) -> int:
        # mean/var/skew + glcm props + orientation hist + multi-scale var
        return 3 + len(self.glcm_offsets) * 2 * len(GLCM_PROPS) \
            + self.orientation_bins + len(self.scales)


def _quantise(pixels: np.ndarray, levels: int) -> np.ndarray:
    lo, hi = pixels.min(), pixels.max()
    if hi - lo < 1e-12:
        return np.zeros(pixels.shape, dtype=np.int32)
    q = np.floor((pixels - lo) / (hi - lo) * levels).astype(np.int32)
    return np.clip(q, 0, levels - 1)


def _glcm(q: np.ndarray, dy: int, dx: int, levels: int) -> np.ndarray:
    """Symmetric normalised co-occurrence matrix for one offset."""
    h, w = q.shape
    a = q[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
    b = q[max(0, dy):h - max(0, -dy), max(0, dx):w - max(0, -dx)]
    m = np.zeros((levels, levels))
    np.add.at(m, (a.ravel(), b.ravel()), 1.0)
    m = m + m.T
    total = m.sum()
    return m / total if total > 0 else m


def _glcm_props(m: np.ndarray) -> tuple[float, float, float]:
    levels = m.shape[0]
    i, j = np.indices(m.shape)
    d2 = (i - j) ** 2
    contrast = float((m * d2).sum() / (levels - 1) ** 2)  # normalised to [0, 1]
    homogeneity = float((m / (1.0 + d2)).sum())
    nz = m[m > 0]
    entropy = float(-(nz * np.log2(nz)).sum())
    return contrast, homogeneity, entropy


def _block_reduce_mean(pixels: np.ndarray, factor: int) -> np.ndarray:
    h, w = pixels.shape
    h2, w2 = h // factor, w // factor
    if h2 < 1 or w2 < 1:
        return pixels.mean(keepdims=True).reshape(1, 1)
    trimmed = pixels[:h2 * factor, :w2 * factor]
    return trimmed.reshape(h2, factor, w2, factor).mean(axis=(1, 3))


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    extractor_id: str
    config_hash: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if not np.isfinite(v).all():
            raise ValueError("feature values must be finite")


def extract_features(snippet: Snippet | np.ndarray,
                     config: ExtractorConfig | None = None) -> FeatureVector:
    """Texture-bank feature vector for one snippet."""
    config = config or ExtractorConfig()
    pixels = snippet.pixels if isinstance(snippet, Snippet) else np.asarray(snippet)
    pixels = np.asarray(pixels, dtype=np.float64)
    if not np.isfinite(pixels).all():
        raise DegenerateSnippet("snippet contains non-finite pixels")
    if config.presmooth > 1:
        pixels = ndimage.uniform_filter(pixels, size=config.presmooth)

    feats: list[float] = []
    mean = float(pixels.mean())
    var = float(pixels.var())
    std = np.sqrt(var)
    skew = float(((pixels - mean) ** 3).mean() / std ** 3) if std > 1e-12 else 0.0
    # Variance as coefficient of variation: insensitive to range-dependent gain.
    cov = var / mean ** 2 if mean > 1e-12 else 0.0
    feats += [mean, cov, skew]

    q = _quantise(pixels, config.glcm_levels)
    for off in config.glcm_offsets:
        for dy, dx in ((0, off), (off, 0)):
            feats += _glcm_props(_glcm(q, dy, dx, config.glcm_levels))

    gy, gx = np.gradient(pixels)
    mag = np.hypot(gy, gx)
    ang = np.arctan2(gy, gx) % np.pi    # orientation, sign-free
    hist, _ = np.histogram(ang, bins=config.orientation_bins,
                           range=(0.0, np.pi), weights=mag)
    total = hist.sum()
    feats += list(hist / total if total > 1e-12 else hist)

    for f in config.scales:
        sv = float(_block_reduce_mean(pixels, f).var())
        feats.append(sv / mean ** 2 if mean > 1e-12 else 0.0)

    return FeatureVector(values=np.array(feats), extractor_id=config.extractor_id,
                         config_hash=config.config_hash())


def feature_matrix(snippets, config: ExtractorConfig | None = None) -> np.ndarray:
    config = config or ExtractorConfig()
    return np.vstack([extract_features(s, config).values for s in snippets])
