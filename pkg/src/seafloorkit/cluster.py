"""Operator-led seafloor classification.

Online (mini-batch) K-means over snippet texture features produces P
clusters; an operator-supplied surjective P -> C remap with per-class
complexity ranks turns the clusterer into a seafloor classifier. Label
maps from multiple passes merge by modal vote or highest complexity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import GeoGrid, SidescanImage, Snippet, SnippetSpec, extract_snippets
from .errors import (DuplicateRank, EmptyInput, EntryOutOfRange,
                     ExtractorMismatch, GridMismatch, MappingMismatch,
                     NotSurjective, TooFewSamples, TooManyClasses)
from .features import ExtractorConfig, feature_matrix

NO_CLASS = -1


@dataclass
class ClusterModel:
    """Trained centroids in normalised feature space plus provenance."""

    centroids: np.ndarray            # (P, d)
    counts: np.ndarray               # (P,) assignment counts
    norm_means: np.ndarray           # (d,)
    norm_scales: np.ndarray          # (d,), > 0
    extractor: ExtractorConfig
    training_log: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise ValueError("need at least one centroid")
        if (self.norm_scales <= 0).any():
            raise ValueError("normalisation scales must be positive")

    @property
    def p(self) -> int:
        return self.centroids.shape[0]

    def normalise(self, features: np.ndarray) -> np.ndarray:
        return (features - self.norm_means) / self.norm_scales

    def assign(self, features: np.ndarray) -> np.ndarray:
        """Nearest-centroid cluster index for raw (unnormalised) features."""
        z = self.normalise(np.atleast_2d(features))
        d = ((z[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return d.argmin(axis=1)

    def inertia(self, features: np.ndarray) -> float:
        z = self.normalise(np.atleast_2d(features))
        d = ((z[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return float(d.min(axis=1).sum())

    def to_json(self) -> dict:
        return {
            "P": self.p,
            "centroids": self.centroids.tolist(),
            "counts": self.counts.tolist(),
            "extractor": {
                "id": self.extractor.extractor_id,
                "config": {
                    "glcm_levels": self.extractor.glcm_levels,
                    "glcm_offsets": list(self.extractor.glcm_offsets),
                    "orientation_bins": self.extractor.orientation_bins,
                    "scales": list(self.extractor.scales),
                },
                "hash": self.extractor.config_hash(),
            },
            "norm": {"means": self.norm_means.tolist(),
                     "scales": self.norm_scales.tolist()},
            "log": self.training_log,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ClusterModel":
        ext = data["extractor"]
        cfg = ExtractorConfig(
            extractor_id=ext["id"],
            glcm_levels=ext["config"]["glcm_levels"],
            glcm_offsets=tuple(ext["config"]["glcm_offsets"]),
            orientation_bins=ext["config"]["orientation_bins"],
            scales=tuple(ext["config"]["scales"]),
        )
        return cls(centroids=np.array(data["centroids"]),
                   counts=np.array(data["counts"]),
                   norm_means=np.array(data["norm"]["means"]),
                   norm_scales=np.array(data["norm"]["scales"]),
                   extractor=cfg, training_log=data.get("log", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path) -> "ClusterModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def _kmeans_pp_init(z: np.ndarray, p: int, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    centroids = np.empty((p, z.shape[1]))
    centroids[0] = z[rng.integers(n)]
    d2 = ((z - centroids[0]) ** 2).sum(axis=1)
    for k in range(1, p):
        probs = d2 / d2.sum() if d2.sum() > 0 else np.full(n, 1.0 / n)
        centroids[k] = z[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((z - centroids[k]) ** 2).sum(axis=1))
    return centroids


def train_clusterer(snippets, p: int = 20, batch_size: int = 256,
                    max_epochs: int = 50, tolerance: float = 1e-3,
                    seed: int = 0,
                    extractor: ExtractorConfig | None = None,
                    features: np.ndarray | None = None) -> ClusterModel:
    """Mini-batch K-means over snippet features.

    A first pass z-scores every dimension; centroids start k-means++ from a
    seed batch and update with per-centroid 1/count learning rates until
    the largest centroid displacement over an epoch drops below tolerance.
    Pass `features` to skip re-extraction when they are already computed.
    """
    extractor = extractor or ExtractorConfig()
    if features is None:
        snippets = list(snippets)
        if len(snippets) < p:
            raise TooFewSamples(f"{len(snippets)} snippets < P={p}")
        features = feature_matrix(snippets, extractor)
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if n < p or p < 1:
        raise TooFewSamples(f"{n} samples < P={p}")

    means = features.mean(axis=0)
    scales = features.std(axis=0)
    scales[scales < 1e-12] = 1.0
    z = (features - means) / scales

    rng = np.random.default_rng(seed)
    seed_batch = z[rng.choice(n, size=min(n, max(p * 10, batch_size)),
                              replace=False)]
    centroids = _kmeans_pp_init(seed_batch, p, rng)
    counts = np.zeros(p)

    epochs_run, final_shift = 0, np.inf
    for epoch in range(max_epochs):
        order = rng.permutation(n)
        before = centroids.copy()
        for start in range(0, n, batch_size):
            batch = z[order[start:start + batch_size]]
            d = ((batch[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
            assign = d.argmin(axis=1)
            for k in np.unique(assign):
                members = batch[assign == k]
                for x in members:
                    counts[k] += 1
                    eta = 1.0 / counts[k]
                    centroids[k] += eta * (x - centroids[k])
        epochs_run = epoch + 1
        final_shift = float(np.sqrt(((centroids - before) ** 2).sum(axis=1)).max())
        if final_shift < tolerance:
            break

    # Final hard assignment for reported per-centroid counts.
    d = ((z[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assign = d.argmin(axis=1)
    final_counts = np.bincount(assign, minlength=p)

    return ClusterModel(
        centroids=centroids, counts=final_counts,
        norm_means=means, norm_scales=scales, extractor=extractor,
        training_log={"epochs": epochs_run, "final_shift": final_shift,
                      "n_samples": int(n), "batch_size": batch_size,
                      "seed": seed})


def representatives(model: ClusterModel, snippets: list[Snippet], k: int = 9,
                    features: np.ndarray | None = None
                    ) -> list[list[tuple[Snippet, float]]]:
    """Per cluster, the k pool snippets nearest its centroid (ascending).

    Only snippets assigned to the cluster are eligible; empty clusters
    yield empty lists.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not snippets:
        return [[] for _ in range(model.p)]
    if features is None:
        features = feature_matrix(snippets, model.extractor)
    z = model.normalise(features)
    d = np.sqrt(((z[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2))
    assign = d.argmin(axis=1)
    out = []
    for c in range(model.p):
        idx = np.where(assign == c)[0]
        order = idx[np.argsort(d[idx, c], kind="stable")][:k]
        out.append([(snippets[i], float(d[i, c])) for i in order])
    return out


@dataclass(frozen=True)
class LabelClass:
    name: str
    complexity_rank: int


@dataclass(frozen=True)
class LabelMapping:
    """Operator's surjective cluster -> class remap."""

    p: int
    c: int
    map: tuple[int, ...]
    classes: tuple[LabelClass, ...]

    @classmethod
    def identity(cls, p: int, names: list[str] | None = None) -> "LabelMapping":
        names = names or [f"class_{i}" for i in range(p)]
        return cls(p=p, c=p, map=tuple(range(p)),
                   classes=tuple(LabelClass(n, i) for i, n in enumerate(names)))

    def to_json(self) -> dict:
        return {"P": self.p, "C": self.c, "map": list(self.map),
                "classes": [{"name": k.name, "complexity_rank": k.complexity_rank}
                            for k in self.classes]}

    @classmethod
    def from_json(cls, data: dict) -> "LabelMapping":
        return cls(p=data["P"], c=data["C"], map=tuple(data["map"]),
                   classes=tuple(LabelClass(k["name"], k["complexity_rank"])
                                 for k in data["classes"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path) -> "LabelMapping":
        return cls.from_json(json.loads(Path(path).read_text()))

    def ranks(self) -> np.ndarray:
        return np.array([k.complexity_rank for k in self.classes])


def validate_mapping(mapping: LabelMapping) -> None:
    """Raise unless the mapping is a valid surjective P -> C remap."""
    if mapping.c > mapping.p:
        raise TooManyClasses(f"C={mapping.c} > P={mapping.p}")
    if len(mapping.map) != mapping.p:
        raise EntryOutOfRange(f"map length {len(mapping.map)} != P={mapping.p}")
    if len(mapping.classes) != mapping.c:
        raise EntryOutOfRange(f"{len(mapping.classes)} class entries != C")
    for v in mapping.map:
        if not 0 <= v < mapping.c:
            raise EntryOutOfRange(f"map entry {v} outside [0, {mapping.c})")
    if set(mapping.map) != set(range(mapping.c)):
        missing = sorted(set(range(mapping.c)) - set(mapping.map))
        raise NotSurjective(f"classes {missing} unused")
    ranks = [k.complexity_rank for k in mapping.classes]
    if len(set(ranks)) != len(ranks):
        raise DuplicateRank("complexity ranks must be unique")


@dataclass
class TerrainLabelMap:
    """Geo grid of class ids (-1 = no data) with provenance."""

    grid: GeoGrid
    mapping: LabelMapping
    pass_ids: list[str] = field(default_factory=list)
    merge_policy: str | None = None


def classify(image: SidescanImage, model: ClusterModel, mapping: LabelMapping,
             spec: SnippetSpec | None = None,
             cell_size: float | None = None) -> TerrainLabelMap:
    """Grid-snippet classification into an operator-labelled terrain map."""
    if mapping.p != model.p:
        raise MappingMismatch(f"mapping P={mapping.p} != model P={model.p}")
    validate_mapping(mapping)
    spec = spec or SnippetSpec()
    snippets = extract_snippets(image, spec, mode="grid")
    feats = feature_matrix(snippets, model.extractor)
    if feats.shape[1] != model.centroids.shape[1]:
        raise ExtractorMismatch("feature length differs from model")
    clusters = model.assign(feats)
    classes = np.array(mapping.map)[clusters]

    centers = np.array([s.geo_center for s in snippets])
    cs = cell_size if cell_size is not None else spec.stride_m
    grid = GeoGrid.covering(centers, cs, dtype=np.int16, nodata=NO_CLASS)
    for (e, n), cls_id in zip(centers, classes):
        ix, iy = grid.cell_of(e, n)
        if grid.in_bounds(ix, iy):
            grid.values[iy, ix] = cls_id
    return TerrainLabelMap(grid=grid, mapping=mapping,
                           pass_ids=[image.image_id])


def merge_maps(maps: list[TerrainLabelMap], mapping: LabelMapping,
               policy: str = "max_votes") -> TerrainLabelMap:
    """Combine per-pass label maps cell-wise.

    max_votes: modal class, ties to the higher complexity rank.
    max_complexity: highest complexity rank observed.
    """
    if not maps:
        raise EmptyInput("no maps to merge")
    if policy not in ("max_votes", "max_complexity"):
        raise ValueError(f"unknown merge policy {policy!r}")
    g0 = maps[0].grid
    for m in maps[1:]:
        if (m.grid.origin != g0.origin or m.grid.cell_size != g0.cell_size
                or m.grid.values.shape != g0.values.shape):
            raise GridMismatch("maps must share grid geometry")

    ranks = mapping.ranks()
    stack = np.stack([m.grid.values for m in maps])   # (n, h, w)
    out = np.full(g0.values.shape, NO_CLASS, dtype=np.int16)
    valid = stack != NO_CLASS
    any_valid = valid.any(axis=0)

    if policy == "max_complexity":
        rank_of = np.where(valid, ranks[np.clip(stack, 0, None)], -np.inf)
        best = rank_of.max(axis=0)
        for cls_id in range(mapping.c):
            out[any_valid & (best == ranks[cls_id])] = cls_id
    else:
        h, w = g0.values.shape
        votes = np.zeros((mapping.c, h, w), dtype=np.int32)
        for cls_id in range(mapping.c):
            votes[cls_id] = ((stack == cls_id) & valid).sum(axis=0)
        # Ties break toward the higher complexity rank.
        order = np.argsort(ranks, kind="stable")       # ascending rank
        best_votes = np.full((h, w), -1, dtype=np.int32)
        for cls_id in order:
            better = votes[cls_id] >= best_votes       # >= : later (higher rank) wins ties
            out[better & any_valid & (votes[cls_id] > 0)] = cls_id
            best_votes = np.maximum(best_votes, votes[cls_id])
    return TerrainLabelMap(grid=GeoGrid(origin=g0.origin, cell_size=g0.cell_size,
                                        values=out, nodata=NO_CLASS),
                           mapping=mapping,
                           pass_ids=[p for m in maps for p in m.pass_ids],
                           merge_policy=policy)


def evaluate_precision(cluster_assignments, truth_labels):
    """Cluster-majority precision plus a confusion matrix.

    Each cluster takes the majority truth class of its members; precision
    is the fraction of samples whose cluster-majority class matches their
    own truth. Returns (precision, confusion, majority_of_cluster) where
    confusion is truth x cluster-majority counts.
    """
    assign = np.asarray(cluster_assignments)
    truth = np.asarray(truth_labels)
    if assign.size == 0 or assign.shape != truth.shape:
        raise EmptyInput("need matching non-empty assignment and truth arrays")

    truth_ids = {t: i for i, t in enumerate(sorted(set(truth.tolist())))}
    t_idx = np.array([truth_ids[t] for t in truth.tolist()])
    n_t = len(truth_ids)
    majority = {}
    for c in set(assign.tolist()):
        members = t_idx[assign == c]
        counts = np.bincount(members, minlength=n_t)
        majority[c] = int(counts.argmax())
    pred = np.array([majority[c] for c in assign.tolist()])
    precision = float((pred == t_idx).mean())
    confusion = np.zeros((n_t, n_t), dtype=np.int64)
    np.add.at(confusion, (t_idx, pred), 1)
    return precision, confusion, majority
