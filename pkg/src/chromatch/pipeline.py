"""End-to-end colorization pipeline.

The run is split in two stages so interactive remapping stays cheap:

* prepare(): everything independent of the user's remap — feature
  extraction, joint center fitting, class assignment, category reduction,
  per-cell reference chrominance. This is the expensive part and is
  computed once per image pair.
* finish(): apply the remap to pristine reduced class maps, build the
  class-partitioned correspondence, warp chrominance and reference
  confidence, fuse confidences, assemble the output image, and score it.

finish(prepared, remap) is a pure function of its inputs, so a remap update
equals a cold run with the remap baked in — byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from chromatch.correspondence import (
    Correspondence,
    classwise_correspondence,
    similarity_map,
    warp_channels,
)
from chromatch.errors import ParameterError
from chromatch.features import (
    DEFAULT_STRIDE,
    FeatureMap,
    crop_to_grid,
    extract_builtin_features,
    load_external_features,
)
from chromatch.fusion import (
    FILL_POLICIES,
    FusedConfidence,
    assemble_output,
    compose_confidence,
)
from chromatch.metrics import LossReport, l1_loss, perceptual_distance_map, smp_loss, total_loss
from chromatch.segmentation import (
    DEFAULT_INITIAL_CLASSES,
    DEFAULT_REDUCED_CLASSES,
    ClassMap,
    ConfidenceMap,
    apply_reduction,
    apply_remap,
    assign_classes,
    fit_centers,
    load_class_map,
    reduce_categories,
)
from chromatch.tensor_io import LabImage, lab_to_rgb, rgb_to_lab


@dataclass
class PipelineConfig:
    stride: int = DEFAULT_STRIDE
    initial_classes: int = DEFAULT_INITIAL_CLASSES
    reduced_k: int = DEFAULT_REDUCED_CLASSES
    tau: float = 0.01
    seed: int = 0
    fill: str = "propagate"
    feature_files: tuple[str, str] | None = None  # (target, reference) SPTN
    classmap_files: tuple[str, str] | None = None  # (target, reference) SPTN
    remap_target: dict[int, int] = field(default_factory=dict)
    remap_reference: dict[int, int] = field(default_factory=dict)

    def validate(self) -> None:
        if self.stride < 1:
            raise ParameterError(f"stride must be >= 1, got {self.stride}")
        if not 1 <= self.reduced_k <= self.initial_classes:
            raise ParameterError(
                f"reduced class count must be in [1, {self.initial_classes}], "
                f"got {self.reduced_k}"
            )
        if self.tau <= 0:
            raise ParameterError(f"tau must be > 0, got {self.tau}")
        if self.fill not in FILL_POLICIES:
            raise ParameterError(f"unknown fill policy {self.fill!r}")


@dataclass
class PreparedPair:
    """Remap-independent state for one (target, reference) pair."""

    config: PipelineConfig
    lab_t: LabImage
    lab_r: LabImage
    f_t: FeatureMap
    f_r: FeatureMap
    off_t: tuple[int, int]
    off_r: tuple[int, int]
    k: int
    class_t: ClassMap  # reduced, pristine (no remap applied)
    class_r: ClassMap
    conf_t: ConfidenceMap
    conf_r: ConfidenceMap
    ref_cell_ab: np.ndarray  # (gridH_r, gridW_r, 2) per-cell mean chrominance


@dataclass
class PipelineResult:
    image: LabImage
    rgb: np.ndarray  # (H, W, 3) uint8
    meta: dict
    correspondence: Correspondence
    sim: np.ndarray  # (ghT, gwT) f32
    fused: FusedConfidence
    w_ab: np.ndarray  # (ghT, gwT, 2) f32
    class_t: ClassMap  # after remap
    class_r: ClassMap
    losses: LossReport


def _cell_means(plane: np.ndarray, stride: int) -> np.ndarray:
    h, w = plane.shape
    gh, gw = h // stride, w // stride
    return (
        plane.astype(np.float64)
        .reshape(gh, stride, gw, stride)
        .mean(axis=(1, 3))
    )


def prepare(
    target_rgb: np.ndarray, reference_rgb: np.ndarray, config: PipelineConfig
) -> PreparedPair:
    config.validate()
    lab_t = rgb_to_lab(target_rgb)
    lab_r = rgb_to_lab(reference_rgb)

    plane_t, oy_t, ox_t = crop_to_grid(lab_t.L.astype(np.float64), config.stride)
    plane_r, oy_r, ox_r = crop_to_grid(lab_r.L.astype(np.float64), config.stride)

    if config.feature_files is not None:
        f_t = load_external_features(config.feature_files[0], config.stride)
        f_r = load_external_features(config.feature_files[1], config.stride)
        want_t = (plane_t.shape[0] // config.stride, plane_t.shape[1] // config.stride)
        want_r = (plane_r.shape[0] // config.stride, plane_r.shape[1] // config.stride)
        if (f_t.grid_h, f_t.grid_w) != want_t or (f_r.grid_h, f_r.grid_w) != want_r:
            raise ParameterError(
                "external feature grids do not match image/stride geometry"
            )
    else:
        f_t = extract_builtin_features(plane_t, config.stride)
        f_r = extract_builtin_features(plane_r, config.stride)

    if config.classmap_files is not None:
        class_t = load_class_map(config.classmap_files[0])
        class_r = load_class_map(config.classmap_files[1])
        if (class_t.grid_h, class_t.grid_w) != (f_t.grid_h, f_t.grid_w) or (
            class_r.grid_h,
            class_r.grid_w,
        ) != (f_r.grid_h, f_r.grid_w):
            raise ParameterError("class map grids do not match feature grids")
        k = max(class_t.k, class_r.k)
        class_t = replace(class_t, k=k)
        class_r = replace(class_r, k=k)
        # externally supplied segmentations carry no margin information
        conf_t = ConfidenceMap(
            values=np.ones((f_t.grid_h, f_t.grid_w), np.float32)
        )
        conf_r = ConfidenceMap(
            values=np.ones((f_r.grid_h, f_r.grid_w), np.float32)
        )
    else:
        centers = fit_centers([f_t, f_r], config.initial_classes, config.seed)
        raw_t, conf_t = assign_classes(f_t, centers)
        raw_r, conf_r = assign_classes(f_r, centers)
        table = reduce_categories(centers, config.reduced_k, config.seed)
        class_t = apply_reduction(raw_t, table)
        class_r = apply_reduction(raw_r, table)
        k = config.reduced_k

    # per-cell reference chrominance, on the same crop as the features
    ab_r_full = lab_r.ab_stack().astype(np.float64)
    crop_a, _, _ = crop_to_grid(ab_r_full[..., 0], config.stride)
    crop_b, _, _ = crop_to_grid(ab_r_full[..., 1], config.stride)
    ref_cell_ab = np.stack(
        [_cell_means(crop_a, config.stride), _cell_means(crop_b, config.stride)],
        axis=-1,
    )

    return PreparedPair(
        config=config,
        lab_t=lab_t,
        lab_r=lab_r,
        f_t=f_t,
        f_r=f_r,
        off_t=(oy_t, ox_t),
        off_r=(oy_r, ox_r),
        k=k,
        class_t=class_t,
        class_r=class_r,
        conf_t=conf_t,
        conf_r=conf_r,
        ref_cell_ab=ref_cell_ab,
    )


def finish(
    prepared: PreparedPair,
    remap_target: dict[int, int] | None = None,
    remap_reference: dict[int, int] | None = None,
) -> PipelineResult:
    """Apply a remap to the pristine reduced class maps and produce the
    colorized result. Pure: calling twice gives identical bytes."""
    cfg = prepared.config
    c_t = apply_remap(prepared.class_t, remap_target or {})
    c_r = apply_remap(prepared.class_r, remap_reference or {})

    corr = classwise_correspondence(
        prepared.f_t, prepared.f_r, c_t, c_r, tau=cfg.tau
    )
    w_ab = warp_channels(corr, prepared.ref_cell_ab)
    warped_conf_r = warp_channels(corr, prepared.conf_r.values)
    sim = similarity_map(corr)
    fused = compose_confidence(sim, prepared.conf_t, warped_conf_r)

    image, meta = assemble_output(
        prepared.lab_t.L,
        w_ab,
        corr.related,
        stride=cfg.stride,
        off_y=prepared.off_t[0],
        off_x=prepared.off_t[1],
        policy=cfg.fill,
        fused=fused,
    )
    rgb = lab_to_rgb(image)

    # score against the target's own content: its chrominance is ground
    # truth when the target is the color original (self-reference runs);
    # with the luminance-based built-in features the perceptual term is
    # structurally zero because output L is never altered.
    out_plane, _, _ = crop_to_grid(image.L.astype(np.float64), cfg.stride)
    f_out = (
        extract_builtin_features(out_plane, cfg.stride)
        if cfg.feature_files is None
        else prepared.f_t
    )
    perc_map = perceptual_distance_map(f_out, prepared.f_t)
    perc = float(perc_map.mean())
    smp = smp_loss(perc_map, fused)
    l1 = l1_loss(image.ab_stack(), prepared.lab_t.ab_stack())
    losses = total_loss(perc, smp, l1)

    return PipelineResult(
        image=image,
        rgb=rgb,
        meta=meta,
        correspondence=corr,
        sim=sim,
        fused=fused,
        w_ab=w_ab,
        class_t=c_t,
        class_r=c_r,
        losses=losses,
    )


def run(
    target_rgb: np.ndarray, reference_rgb: np.ndarray, config: PipelineConfig
) -> PipelineResult:
    """prepare + finish with the config's own remap."""
    prepared = prepare(target_rgb, reference_rgb, config)
    return finish(prepared, config.remap_target, config.remap_reference)


def result_artifacts(res: PipelineResult) -> dict[str, np.ndarray]:
    """Exportable tensors by name (shared by CLI dumps and the service)."""
    return {
        "similarity": res.sim.astype(np.float32),
        "confidence": res.fused.values.astype(np.float32),
        "warped_ab": res.w_ab.astype(np.float32),
        "class_target": res.class_t.labels.astype(np.int32),
        "class_reference": res.class_r.labels.astype(np.int32),
        "argmax": res.correspondence.argmax_indices(),
    }
