"""Per-cell feature grids over the luminance channel.

The built-in extractor summarizes each stride x stride cell with a 12-dim
descriptor:

    [0]    mean L over the cell
    [1]    std L over the cell
    [2:10] 8-bin gradient-orientation histogram, magnitude-weighted
    [10]   mean L over a 2x-sized window centered on the cell
    [11]   mean L over a 4x-sized window centered on the cell

Gradients use central differences; the outermost 1-pixel image border gets
zero weight, so rotating the image by 90 degrees permutes the orientation
bins by exactly two positions. Each channel is z-normalized over the grid
(channels with zero variance keep their raw values).

Externally computed features (e.g. from a pretrained network, exported
offline) can be loaded from SPTN files and used interchangeably.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chromatch.errors import DataError, ParameterError
from chromatch.tensor_io import SptnError, load_tensor

FEATURE_DIM = 12
DEFAULT_STRIDE = 4


@dataclass
class FeatureMap:
    """Grid of per-cell feature vectors: values[h, w, d], f32."""

    values: np.ndarray  # (gridH, gridW, dim) float32
    stride: int

    @property
    def grid_h(self) -> int:
        return self.values.shape[0]

    @property
    def grid_w(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def flat(self) -> np.ndarray:
        """Cells flattened row-major: (gridH*gridW, dim)."""
        return self.values.reshape(-1, self.values.shape[2])


def crop_to_grid(plane: np.ndarray, stride: int) -> tuple[np.ndarray, int, int]:
    """Center-crop (or edge-pad when smaller than one cell) so both image
    dims are divisible by ``stride``.

    Returns the adjusted plane plus the (row, col) offset of its origin in
    the original image; negative offsets mean padding was added.
    """
    h, w = plane.shape
    pad_h = max(0, stride - h)
    pad_w = max(0, stride - w)
    if pad_h or pad_w:
        top, left = pad_h // 2, pad_w // 2
        plane = np.pad(
            plane,
            ((top, pad_h - top), (left, pad_w - left)),
            mode="edge",
        )
        h, w = plane.shape
    ch = (h // stride) * stride
    cw = (w // stride) * stride
    off_y = (h - ch) // 2
    off_x = (w - cw) // 2
    plane = plane[off_y : off_y + ch, off_x : off_x + cw]
    if pad_h or pad_w:
        off_y -= pad_h // 2
        off_x -= pad_w // 2
    return plane, off_y, off_x


def _window_means(plane: np.ndarray, stride: int, margin: int) -> np.ndarray:
    """Mean over [cell - margin, cell + margin) windows, clipped to bounds."""
    h, w = plane.shape
    gh, gw = h // stride, w // stride
    # summed-area table with a zero border
    sat = np.zeros((h + 1, w + 1), dtype=np.float64)
    sat[1:, 1:] = np.cumsum(np.cumsum(plane, axis=0), axis=1)
    i = np.arange(gh)
    j = np.arange(gw)
    y0 = np.clip(i * stride - margin, 0, h)
    y1 = np.clip((i + 1) * stride + margin, 0, h)
    x0 = np.clip(j * stride - margin, 0, w)
    x1 = np.clip((j + 1) * stride + margin, 0, w)
    y0g, x0g = np.meshgrid(y0, x0, indexing="ij")
    y1g, x1g = np.meshgrid(y1, x1, indexing="ij")
    total = sat[y1g, x1g] - sat[y0g, x1g] - sat[y1g, x0g] + sat[y0g, x0g]
    area = (y1g - y0g) * (x1g - x0g)
    return total / area


def _octant_bins(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Bin index floor((angle + pi) / 45deg) computed by sign/magnitude
    comparisons instead of arctan2, so boundary angles land in the same bin
    before and after an exact 90-degree rotation of the gradient field.
    Bins are half-open [lo, hi) counted counterclockwise from angle -pi.
    """
    x, y = gx, gy
    b = np.zeros(x.shape, dtype=np.int64)  # default: angle pi / [-pi,-3pi/4)
    b = np.where((y < 0) & (x < 0) & (y <= x), 1, b)
    b = np.where((y < 0) & (x >= 0) & (x < -y), 2, b)
    b = np.where((y < 0) & (x > 0) & (x >= -y), 3, b)
    b = np.where((x > 0) & (y >= 0) & (y < x), 4, b)
    b = np.where((x > 0) & (y > 0) & (y >= x), 5, b)
    b = np.where((y > 0) & (x <= 0) & (-x < y), 6, b)
    b = np.where((y > 0) & (x < 0) & (-x >= y), 7, b)
    return b


def _gradient_histograms(plane: np.ndarray, stride: int) -> np.ndarray:
    h, w = plane.shape
    gh, gw = h // stride, w // stride
    gx = np.zeros((h, w), dtype=np.float64)
    gy = np.zeros((h, w), dtype=np.float64)
    gx[:, 1:-1] = (plane[:, 2:] - plane[:, :-2]) / 2.0
    gy[1:-1, :] = (plane[2:, :] - plane[:-2, :]) / 2.0
    mag = np.hypot(gx, gy)
    # zero-weight the 1-pixel border so rotation permutes bins cleanly
    mag[0, :] = 0.0
    mag[-1, :] = 0.0
    mag[:, 0] = 0.0
    mag[:, -1] = 0.0
    bins = _octant_bins(gx, gy)
    hist = np.zeros((gh, gw, 8), dtype=np.float64)
    for b in range(8):
        weighted = np.where(bins == b, mag, 0.0)
        hist[:, :, b] = weighted.reshape(gh, stride, gw, stride).sum(axis=(1, 3))
    return hist


def _raw_feature_grid(plane: np.ndarray, stride: int) -> np.ndarray:
    h, w = plane.shape
    gh, gw = h // stride, w // stride
    cells = plane.reshape(gh, stride, gw, stride)
    out = np.empty((gh, gw, FEATURE_DIM), dtype=np.float64)
    out[:, :, 0] = cells.mean(axis=(1, 3))
    out[:, :, 1] = cells.std(axis=(1, 3))
    out[:, :, 2:10] = _gradient_histograms(plane, stride)
    out[:, :, 10] = _window_means(plane, stride, stride // 2)
    out[:, :, 11] = _window_means(plane, stride, (3 * stride) // 2)
    return out


def znormalize(raw: np.ndarray) -> np.ndarray:
    """Z-normalize each channel over the grid; zero-variance channels keep
    their raw values (a constant image must still produce usable cells)."""
    mu = raw.mean(axis=(0, 1))
    sigma = raw.std(axis=(0, 1))
    keep = sigma <= 0.0
    safe_sigma = np.where(keep, 1.0, sigma)
    normed = (raw - mu) / safe_sigma
    return np.where(keep, raw, normed)


def extract_builtin_features(
    luminance: np.ndarray, stride: int = DEFAULT_STRIDE, normalize: bool = True
) -> FeatureMap:
    """Extract the 12-dim handcrafted descriptor grid from an L plane."""
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    plane = np.asarray(luminance, dtype=np.float64)
    if plane.ndim != 2:
        raise ParameterError(f"expected a 2-D luminance plane, got {plane.shape}")
    plane, _, _ = crop_to_grid(plane, stride)
    raw = _raw_feature_grid(plane, stride)
    values = znormalize(raw) if normalize else raw
    values = values.astype(np.float32)
    if not np.all(np.isfinite(values)):
        raise DataError("non-finite feature values")
    norms = np.linalg.norm(values.reshape(-1, FEATURE_DIM), axis=1)
    if not np.any(norms > 0):
        raise DataError("no feature energy")
    return FeatureMap(values=values, stride=stride)


def load_external_features(path: str | Path, expected_stride: int) -> FeatureMap:
    """Load a precomputed feature grid from an SPTN file ([H, W, D] f32)."""
    t = load_tensor(path)
    if t.ndim != 3:
        raise SptnError(f"feature file must be rank 3 [H, W, D], got rank {t.ndim}")
    if t.dtype != np.float32:
        raise SptnError(f"feature file must be f32, got {t.dtype}")
    bad = ~np.isfinite(t)
    if bad.any():
        h, w, d = np.argwhere(bad)[0]
        raise DataError(f"non-finite feature value at cell ({h}, {w}), dim {d}")
    return FeatureMap(values=t, stride=expected_stride)
