"""Confidence fusion and final image assembly.

The fused confidence multiplies three per-cell maps: correspondence
similarity (clamped to [0,1] so a negative cosine cannot flip the sign),
the target's own classification confidence, and the reference confidence
warped onto the target grid. Unrelated cells are zero in the first and
third factors, so they stay zero after fusion.

Assembly upsamples the warped chrominance bilinearly to image resolution
and fills unrelated cells per policy — neutral gray, or the color of the
nearest related cell. Luminance is passed through untouched, always.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from chromatch.errors import ParameterError
from chromatch.segmentation import ConfidenceMap
from chromatch.tensor_io import LabImage

FillPolicy = Literal["neutral", "propagate"]

FILL_POLICIES = ("neutral", "propagate")


@dataclass
class FusedConfidence:
    values: np.ndarray  # (gridH, gridW) float32 in [0, 1]


def compose_confidence(
    s_w: np.ndarray, s_cl_t: ConfidenceMap, s_cl_r_warped: np.ndarray
) -> FusedConfidence:
    """Per-cell product clamp(s_w, 0, 1) * s_cl_t * warped reference
    confidence. Monotone in each factor and bounded by each."""
    sw = np.asarray(s_w, dtype=np.float64)
    st = np.asarray(s_cl_t.values, dtype=np.float64)
    sr = np.asarray(s_cl_r_warped, dtype=np.float64)
    if not (sw.shape == st.shape == sr.shape):
        raise ParameterError(
            f"confidence grids disagree: {sw.shape}, {st.shape}, {sr.shape}"
        )
    fused = np.clip(sw, 0.0, 1.0) * st * sr
    return FusedConfidence(values=np.clip(fused, 0.0, 1.0).astype(np.float32))


def bilinear_at(values: np.ndarray, gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    """Sample a (H, W) or (H, W, C) grid at fractional coordinates with
    bilinear weights; coordinates are clamped to the grid."""
    h, w = values.shape[:2]
    gy = np.clip(gy, 0.0, h - 1.0)
    gx = np.clip(gx, 0.0, w - 1.0)
    y0 = np.floor(gy).astype(np.int64)
    x0 = np.floor(gx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (gy - y0)[..., None] if values.ndim == 3 else gy - y0
    fx = (gx - x0)[..., None] if values.ndim == 3 else gx - x0
    v00 = values[y0, x0]
    v01 = values[y0, x1]
    v10 = values[y1, x0]
    v11 = values[y1, x1]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy


def upsample_to_image(
    grid: np.ndarray,
    out_h: int,
    out_w: int,
    stride: int,
    off_y: int = 0,
    off_x: int = 0,
) -> np.ndarray:
    """Bilinearly upsample a cell grid to image resolution.

    Cell (ci, cj) is centered at image pixel off + ci*stride + (stride-1)/2;
    sampling is exact at those centers.
    """
    ys = np.arange(out_h, dtype=np.float64)
    xs = np.arange(out_w, dtype=np.float64)
    gy = (ys - off_y - (stride - 1) / 2.0) / stride
    gx = (xs - off_x - (stride - 1) / 2.0) / stride
    gyg, gxg = np.meshgrid(gy, gx, indexing="ij")
    return bilinear_at(np.asarray(grid, dtype=np.float64), gyg, gxg)


def _propagate_fill(ab: np.ndarray, related: np.ndarray) -> np.ndarray:
    """Replace unrelated cells with the ab of the nearest related cell
    (squared Euclidean on grid indices; ties go to the first cell in
    row-major order). Exact integer distances, chunked to bound memory."""
    gh, gw = related.shape
    rel_idx = np.flatnonzero(related.reshape(-1))
    unrel_idx = np.flatnonzero(~related.reshape(-1))
    if len(unrel_idx) == 0:
        return ab
    out = ab.copy()
    ry = (rel_idx // gw).astype(np.int64)
    rx = (rel_idx % gw).astype(np.int64)
    flat_ab = ab.reshape(-1, ab.shape[-1])
    out_flat = out.reshape(-1, ab.shape[-1])
    chunk = 1024
    for start in range(0, len(unrel_idx), chunk):
        part = unrel_idx[start : start + chunk]
        uy = (part // gw)[:, None]
        ux = (part % gw)[:, None]
        d2 = (uy - ry[None, :]) ** 2 + (ux - rx[None, :]) ** 2
        nearest = rel_idx[np.argmin(d2, axis=1)]
        out_flat[part] = flat_ab[nearest]
    return out


def assemble_output(
    luminance: np.ndarray,
    w_ab: np.ndarray,
    related: np.ndarray,
    *,
    stride: int,
    off_y: int = 0,
    off_x: int = 0,
    policy: FillPolicy = "propagate",
    fused: FusedConfidence | None = None,
) -> tuple[LabImage, dict]:
    """Build the output image: upsampled warped chrominance over the
    original luminance, with unrelated cells filled per policy.

    Returns the image plus metadata (policy used, related-cell fraction,
    warnings).
    """
    if policy not in FILL_POLICIES:
        raise ParameterError(f"unknown fill policy {policy!r}")
    luminance = np.asarray(luminance, dtype=np.float32)
    if luminance.ndim != 2:
        raise ParameterError("luminance must be a 2-D plane")
    related = np.asarray(related, dtype=bool)
    if w_ab.shape[:2] != related.shape:
        raise ParameterError("warped grid and related mask disagree")

    warnings: list[str] = []
    used = policy
    ab = np.asarray(w_ab, dtype=np.float64)
    n_related = int(related.sum())
    if policy == "propagate":
        if n_related == 0:
            warnings.append("no related cells; fell back to neutral fill")
            used = "neutral"
        else:
            ab = _propagate_fill(ab, related)
    # neutral: unrelated cells already carry exact zeros

    h, w = luminance.shape
    up = upsample_to_image(ab, h, w, stride, off_y, off_x)
    meta = {
        "policy": used,
        "related_fraction": n_related / related.size,
        "warnings": warnings,
    }
    if fused is not None:
        meta["mean_confidence"] = float(fused.values.mean())
    return (
        LabImage(
            L=luminance,
            a=up[..., 0].astype(np.float32),
            b=up[..., 1].astype(np.float32),
        ),
        meta,
    )
