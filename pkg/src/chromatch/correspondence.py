"""Non-local correspondence between two feature grids.

Global mode scores every (target cell, reference cell) pair by cosine
similarity and turns each row into softmax weights at a small temperature.
Class-partitioned mode restricts candidate pairs to cells sharing a class
label: matching happens only inside labels present on BOTH sides, and
target cells whose label has no reference counterpart are "unrelated" —
their warped channels and similarity are exactly zero.

Weights are kept in per-class dense blocks (grids here are small, at most
a few thousand cells), so warping is a handful of matrix products and the
numbers are reproducible: float64 inside, fixed block order, max-subtracted
softmax. Both modes run through the same block kernel, which makes the
single-shared-class case of the partitioned mode bit-identical to global
matching.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from chromatch.errors import ParameterError
from chromatch.features import FeatureMap
from chromatch.segmentation import ClassMap

DEFAULT_TAU = 0.01
_NORM_EPS = 1e-12


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0 if either is ~zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ParameterError(f"vector shapes disagree: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < _NORM_EPS or nv < _NORM_EPS:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass
class BlockWeights:
    """Dense softmax weights for one class block."""

    label: int
    t_idx: np.ndarray  # flat target cell indices, ascending
    r_idx: np.ndarray  # flat reference cell indices, ascending
    weights: np.ndarray  # (len(t_idx), len(r_idx)) float64, rows sum to 1


@dataclass
class Correspondence:
    mode: str  # "global" | "classwise"
    tau: float
    target_shape: tuple[int, int]
    ref_shape: tuple[int, int]
    blocks: list[BlockWeights] = field(default_factory=list)
    max_sim: np.ndarray = None  # (ht, wt) float32, 0 where unrelated
    related: np.ndarray = None  # (ht, wt) bool

    def candidates_for(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Candidate reference cells and weights for one target cell.

        Returns (flat reference indices, weights); both empty for an
        unrelated cell.
        """
        flat = i * self.target_shape[1] + j
        for b in self.blocks:
            pos = np.searchsorted(b.t_idx, flat)
            if pos < len(b.t_idx) and b.t_idx[pos] == flat:
                return b.r_idx, b.weights[pos]
        return np.array([], dtype=np.int64), np.array([], dtype=np.float64)

    def argmax_indices(self) -> np.ndarray:
        """Flat reference index of each cell's strongest candidate; -1 where
        unrelated."""
        out = np.full(self.target_shape, -1, dtype=np.int32)
        flat = out.reshape(-1)
        for b in self.blocks:
            flat[b.t_idx] = b.r_idx[np.argmax(b.weights, axis=1)]
        return out


def _unit_rows(x: np.ndarray) -> np.ndarray:
    """Row-normalize; rows with ~zero norm become zero vectors (cosine 0)."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    u = x / np.where(norms < _NORM_EPS, 1.0, norms)
    u[norms[:, 0] < _NORM_EPS] = 0.0
    return u


def _block_softmax(
    tu: np.ndarray, ru: np.ndarray, tau: float
) -> tuple[np.ndarray, np.ndarray]:
    """Cosine row softmax for one block of unit vectors."""
    sims = np.clip(tu @ ru.T, -1.0, 1.0)
    row_max = sims.max(axis=1)
    exps = np.exp((sims - row_max[:, None]) / tau)
    weights = exps / exps.sum(axis=1, keepdims=True)
    return weights, row_max


def _build(
    f_t: FeatureMap,
    f_r: FeatureMap,
    c_t: ClassMap | None,
    c_r: ClassMap | None,
    tau: float,
    mode: str,
) -> Correspondence:
    if f_t.dim != f_r.dim:
        raise ParameterError(f"feature dims disagree: {f_t.dim} vs {f_r.dim}")
    if tau <= 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    ht, wt = f_t.grid_h, f_t.grid_w
    hr, wr = f_r.grid_h, f_r.grid_w

    if mode == "global":
        labels_t = np.zeros(ht * wt, dtype=np.int64)
        labels_r = np.zeros(hr * wr, dtype=np.int64)
    else:
        if (c_t.grid_h, c_t.grid_w) != (ht, wt) or (c_r.grid_h, c_r.grid_w) != (
            hr,
            wr,
        ):
            raise ParameterError("class maps do not match feature grids")
        labels_t = c_t.labels.reshape(-1).astype(np.int64)
        labels_r = c_r.labels.reshape(-1).astype(np.int64)

    tu = _unit_rows(f_t.flat().astype(np.float64))
    ru = _unit_rows(f_r.flat().astype(np.float64))

    inter = np.intersect1d(np.unique(labels_t), np.unique(labels_r))
    blocks: list[BlockWeights] = []
    max_sim = np.zeros((ht, wt), dtype=np.float32)
    related = np.zeros((ht, wt), dtype=bool)
    for label in inter.tolist():
        t_idx = np.flatnonzero(labels_t == label)
        r_idx = np.flatnonzero(labels_r == label)
        weights, row_max = _block_softmax(tu[t_idx], ru[r_idx], tau)
        blocks.append(
            BlockWeights(label=int(label), t_idx=t_idx, r_idx=r_idx, weights=weights)
        )
        max_sim.reshape(-1)[t_idx] = row_max.astype(np.float32)
        related.reshape(-1)[t_idx] = True
    return Correspondence(
        mode=mode,
        tau=tau,
        target_shape=(ht, wt),
        ref_shape=(hr, wr),
        blocks=blocks,
        max_sim=max_sim,
        related=related,
    )


def global_correspondence(
    f_t: FeatureMap, f_r: FeatureMap, tau: float = DEFAULT_TAU
) -> Correspondence:
    """Dense correspondence: every reference cell is a candidate for every
    target cell."""
    return _build(f_t, f_r, None, None, tau, "global")


def classwise_correspondence(
    f_t: FeatureMap,
    f_r: FeatureMap,
    c_t: ClassMap,
    c_r: ClassMap,
    tau: float = DEFAULT_TAU,
) -> Correspondence:
    """Correspondence restricted to class-matched cell pairs.

    Cells whose label is absent from the reference get no candidates:
    downstream warps yield exact zeros there and the similarity map reads 0.
    """
    return _build(f_t, f_r, c_t, c_r, tau, "classwise")


def warp_channels(c: Correspondence, ref_channels: np.ndarray) -> np.ndarray:
    """Aggregate per-reference-cell values onto the target grid.

    ref_channels: (refH, refW, C) or (refH, refW). Returns (ht, wt, C)
    float32 with exact zeros at unrelated cells.
    """
    ch = np.asarray(ref_channels, dtype=np.float64)
    squeeze = ch.ndim == 2
    if squeeze:
        ch = ch[..., None]
    if ch.shape[:2] != c.ref_shape:
        raise ParameterError(
            f"channel grid {ch.shape[:2]} does not match reference {c.ref_shape}"
        )
    flat_ch = ch.reshape(-1, ch.shape[2])
    ht, wt = c.target_shape
    out = np.zeros((ht * wt, ch.shape[2]), dtype=np.float64)
    for b in c.blocks:
        out[b.t_idx] = b.weights @ flat_ch[b.r_idx]
    out = out.reshape(ht, wt, ch.shape[2]).astype(np.float32)
    return out[..., 0] if squeeze else out


def similarity_map(c: Correspondence) -> np.ndarray:
    """Per-cell maximum cosine similarity, 0 at unrelated cells."""
    return c.max_sim.copy()


def count_pairwise_ops(c_t: ClassMap, c_r: ClassMap) -> tuple[int, int]:
    """(global, classwise) similarity-pair counts for these class maps.

    Classwise work only covers labels present on both sides, so it never
    exceeds the global count.
    """
    total = c_t.labels.size * c_r.labels.size
    lt, tc = np.unique(c_t.labels, return_counts=True)
    lr, rc = np.unique(c_r.labels, return_counts=True)
    ref_counts = dict(zip(lr.tolist(), rc.tolist()))
    partitioned = sum(
        int(n_t) * ref_counts.get(int(lab), 0)
        for lab, n_t in zip(lt.tolist(), tc.tolist())
    )
    return total, partitioned
