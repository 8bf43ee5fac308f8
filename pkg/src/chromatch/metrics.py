"""Evaluation metrics: perceptual distance, confidence-masked perceptual
loss, chrominance L1, and their weighted total.

These mirror training objectives but are used purely as report numbers;
there is no gradient anywhere. The adversarial and smoothness terms exist
only as structural zeros so the weighted-total identity keeps its full
shape. All reductions are means, not sums, so values are comparable across
resolutions.

Note on naming: the masked perceptual term's weight is called lambda_smp
here; some sources quote the same 0.01 default under the name lambda_perc.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from chromatch.errors import DataError, ParameterError
from chromatch.features import FeatureMap
from chromatch.fusion import FusedConfidence

DEFAULT_WEIGHTS = {
    "lambda_l1": 2.0,
    "lambda_smp": 0.01,
    "lambda_adv": 0.4,
    "lambda_smooth": 2.0,
}


@dataclass
class LossReport:
    perc: float
    smp: float
    l1: float
    adv: float
    smooth: float
    lambda_l1: float
    lambda_smp: float
    lambda_adv: float
    lambda_smooth: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


def perceptual_distance_map(fa: FeatureMap, fb: FeatureMap) -> np.ndarray:
    """Per-cell squared L2 distance between two feature grids."""
    if (fa.grid_h, fa.grid_w, fa.dim) != (fb.grid_h, fb.grid_w, fb.dim):
        raise ParameterError(
            f"feature grids disagree: {(fa.grid_h, fa.grid_w, fa.dim)} vs "
            f"{(fb.grid_h, fb.grid_w, fb.dim)}"
        )
    diff = fa.values.astype(np.float64) - fb.values.astype(np.float64)
    return (diff**2).sum(axis=2).astype(np.float32)


def smp_loss(perc_map: np.ndarray, s: FusedConfidence) -> float:
    """Mean of (1 - S) * perceptual distance: penalizes disagreement only
    where correspondence confidence is low."""
    perc = np.asarray(perc_map, dtype=np.float64)
    conf = np.asarray(s.values, dtype=np.float64)
    if perc.shape != conf.shape:
        raise ParameterError(
            f"grids disagree: {perc.shape} vs {conf.shape}"
        )
    return float(((1.0 - conf) * perc).mean())


def l1_loss(ab_a: np.ndarray, ab_b: np.ndarray) -> float:
    """Mean absolute chrominance difference over all pixels and channels."""
    a = np.asarray(ab_a, dtype=np.float64)
    b = np.asarray(ab_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ParameterError(f"shapes disagree: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean())


def total_loss(
    perc: float,
    smp: float,
    l1: float,
    *,
    lambda_l1: float = DEFAULT_WEIGHTS["lambda_l1"],
    lambda_smp: float = DEFAULT_WEIGHTS["lambda_smp"],
    lambda_adv: float = DEFAULT_WEIGHTS["lambda_adv"],
    lambda_smooth: float = DEFAULT_WEIGHTS["lambda_smooth"],
) -> LossReport:
    """Weighted sum of the loss components.

    The adversarial and smoothness components are structurally zero (no
    trained networks here) but keep their weights in the report so the
    total identity stays complete.
    """
    adv = 0.0
    smooth = 0.0
    components = [perc, smp, l1]
    if not all(np.isfinite(v) for v in components):
        raise DataError(f"non-finite loss component in {components}")
    total = (
        lambda_l1 * l1 + lambda_smp * smp + lambda_adv * adv + lambda_smooth * smooth
    )
    return LossReport(
        perc=float(perc),
        smp=float(smp),
        l1=float(l1),
        adv=adv,
        smooth=smooth,
        lambda_l1=lambda_l1,
        lambda_smp=lambda_smp,
        lambda_adv=lambda_adv,
        lambda_smooth=lambda_smooth,
        total=float(total),
    )
