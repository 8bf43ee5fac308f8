"""Pseudo-class segmentation over feature grids.

Cells are clustered with a seeded K-Means into N initial classes shared by
target and reference (joint fit), each assignment carries a margin-ratio
confidence, and the class count can then be reduced by re-clustering the
centers themselves. User remaps relabel classes after reduction to steer
which regions may exchange color.

Everything is deterministic for a fixed seed: k-means++ initialization from
numpy's Generator, at most 100 Lloyd iterations, relative inertia tolerance
1e-6, ties broken toward the lowest index, empty clusters re-seeded to the
farthest point.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chromatch.errors import DataError, ParameterError
from chromatch.features import FeatureMap
from chromatch.tensor_io import SptnError, load_tensor, save_tensor

DEFAULT_INITIAL_CLASSES = 27
DEFAULT_REDUCED_CLASSES = 22

KMEANS_MAX_ITER = 100
KMEANS_REL_TOL = 1e-6


@dataclass
class Centers:
    """Fitted cluster centers, one label space for target and reference."""

    vectors: np.ndarray  # (N, dim) float64

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class ClassMap:
    """Per-cell labels in [0, k)."""

    labels: np.ndarray  # (gridH, gridW) int32
    k: int

    @property
    def grid_h(self) -> int:
        return self.labels.shape[0]

    @property
    def grid_w(self) -> int:
        return self.labels.shape[1]

    def present_labels(self) -> np.ndarray:
        return np.unique(self.labels)


@dataclass
class ConfidenceMap:
    values: np.ndarray  # (gridH, gridW) float32 in [0, 1]


@dataclass
class ReductionTable:
    """Surjective mapping from N original labels onto k reduced labels."""

    original_count: int
    reduced_count: int
    mapping: np.ndarray  # (N,) int32, values in [0, k)


def _kmeans(
    x: np.ndarray, k: int, seed: int
) -> tuple[np.ndarray, np.ndarray, float]:
    """Seeded k-means++ / Lloyd iteration. Returns (centers, labels, inertia).

    Deterministic: generator-seeded init, argmin ties to the lowest index,
    empty clusters re-seeded to the globally farthest point (ties likewise).
    """
    rng = np.random.default_rng(seed)
    n = x.shape[0]

    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(np.argmax(d2))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        centers[c] = x[idx]
        d2 = np.minimum(d2, ((x - centers[c]) ** 2).sum(axis=1))

    prev_inertia = np.inf
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITER):
        dist2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(dist2, axis=1)
        own = dist2[np.arange(n), labels].copy()
        for c in range(k):
            if not np.any(labels == c):
                far = int(np.argmax(own))
                centers[c] = x[far]
                labels[far] = c
                own[far] = 0.0
        inertia = float(own.sum())
        for c in range(k):
            members = x[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
        if np.isfinite(prev_inertia):
            rel = (prev_inertia - inertia) / max(inertia, 1e-300)
            if rel < KMEANS_REL_TOL:
                break
        prev_inertia = inertia
    return centers, labels, inertia


def fit_centers(
    features: FeatureMap | list[FeatureMap], n_classes: int, seed: int
) -> Centers:
    """Fit N cluster centers jointly over one or more feature maps.

    Joint fitting gives target and reference a single shared label space.
    """
    maps = [features] if isinstance(features, FeatureMap) else list(features)
    if not maps:
        raise ParameterError("at least one feature map required")
    dims = {m.dim for m in maps}
    if len(dims) != 1:
        raise ParameterError(f"feature maps disagree on dim: {sorted(dims)}")
    x = np.concatenate([m.flat().astype(np.float64) for m in maps], axis=0)
    if n_classes < 1 or n_classes > x.shape[0]:
        raise ParameterError(
            f"class count must be in [1, {x.shape[0]}], got {n_classes}"
        )
    centers, _, _ = _kmeans(x, n_classes, seed)
    return Centers(vectors=centers)


def assign_classes(f: FeatureMap, c: Centers) -> tuple[ClassMap, ConfidenceMap]:
    """Nearest-center labels plus margin-ratio confidences.

    Confidence is 1 - d1/d2 with d1/d2 the nearest/second-nearest center
    distances (clamped to [0, 1]; defined as 1 when there is a single
    center). Scale-invariant: uniformly scaling all distances changes
    nothing.
    """
    if f.dim != c.dim:
        raise ParameterError(f"feature dim {f.dim} != centers dim {c.dim}")
    x = f.flat().astype(np.float64)
    dist2 = ((x[:, None, :] - c.vectors[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(dist2, axis=1).astype(np.int32)
    if c.count == 1:
        conf = np.ones(x.shape[0], dtype=np.float64)
    else:
        part = np.partition(np.sqrt(dist2), 1, axis=1)
        d1, d2 = part[:, 0], part[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            conf = 1.0 - d1 / d2
        conf[d2 == 0.0] = 1.0  # coincident centers: exact hit
        conf = np.clip(conf, 0.0, 1.0)
    shape = (f.grid_h, f.grid_w)
    return (
        ClassMap(labels=labels.reshape(shape), k=c.count),
        ConfidenceMap(values=conf.reshape(shape).astype(np.float32)),
    )


def _canonicalize(mapping: np.ndarray, k: int) -> np.ndarray:
    """Relabel clusters by first occurrence so output is order-canonical."""
    out = np.empty_like(mapping)
    seen: dict[int, int] = {}
    for i, lab in enumerate(mapping):
        if int(lab) not in seen:
            seen[int(lab)] = len(seen)
        out[i] = seen[int(lab)]
    return out


def reduce_categories(c: Centers, k: int, seed: int) -> ReductionTable:
    """Merge easily confused classes by K-Means over the center vectors.

    mapping[i] is the reduced label of original class i; the mapping is
    surjective onto [0, k) and canonically relabeled by first occurrence,
    so k == N yields the identity.
    """
    if k < 1 or k > c.count:
        raise ParameterError(f"reduced count must be in [1, {c.count}], got {k}")
    _, labels, _ = _kmeans(c.vectors.astype(np.float64), k, seed)
    mapping = _canonicalize(labels, k).astype(np.int32)
    return ReductionTable(original_count=c.count, reduced_count=k, mapping=mapping)


def apply_reduction(m: ClassMap, t: ReductionTable) -> ClassMap:
    if int(m.labels.max()) >= t.original_count or int(m.labels.min()) < 0:
        raise DataError(
            f"labels exceed reduction table domain [0, {t.original_count})"
        )
    return ClassMap(
        labels=t.mapping[m.labels].astype(np.int32), k=t.reduced_count
    )


def apply_remap(m: ClassMap, overrides: dict[int, int]) -> ClassMap:
    """Relabel whole classes at once: every cell whose label is a key takes
    the override value. Applied after reduction, before correspondence."""
    lut = np.arange(m.k, dtype=np.int32)
    for src, dst in overrides.items():
        if not (0 <= int(src) < m.k) or not (0 <= int(dst) < m.k):
            raise ParameterError(
                f"remap entry {src}->{dst} outside label range [0, {m.k})"
            )
        lut[int(src)] = int(dst)
    return ClassMap(labels=lut[m.labels], k=m.k)


def compose_reductions(t1: ReductionTable, t2: ReductionTable) -> ReductionTable:
    """Table equivalent of applying t1 then t2."""
    if t2.original_count != t1.reduced_count:
        raise ParameterError("tables do not compose: label spaces disagree")
    return ReductionTable(
        original_count=t1.original_count,
        reduced_count=t2.reduced_count,
        mapping=t2.mapping[t1.mapping],
    )


# ---------------------------------------------------------------------------
# ClassMap files (externally computed segmentations)
# ---------------------------------------------------------------------------

def save_class_map(m: ClassMap, path: str | Path) -> None:
    save_tensor(m.labels.astype(np.int32), path)


def load_class_map(path: str | Path) -> ClassMap:
    t = load_tensor(path)
    if t.ndim != 2:
        raise SptnError(f"class map must be rank 2, got rank {t.ndim}")
    if t.dtype != np.int32:
        raise SptnError(f"class map must be i32, got {t.dtype}")
    if int(t.min()) < 0:
        raise DataError("class map contains negative labels")
    return ClassMap(labels=t, k=int(t.max()) + 1)
