"""chromatch: deterministic exemplar-based image colorization.

Transfers chrominance from a colored reference image onto a grayscale
target via class-partitioned non-local correspondence over handcrafted
features, with confidence-weighted fusion and reproducible outputs.
"""

from chromatch.tensor_io import (
    LabImage,
    SptnError,
    lab_to_rgb,
    load_png,
    load_tensor,
    rgb_to_lab,
    save_png,
    save_tensor,
    tensor_from_bytes,
    tensor_to_bytes,
)

__version__ = "0.1.0"

__all__ = [
    "LabImage",
    "SptnError",
    "lab_to_rgb",
    "load_png",
    "load_tensor",
    "rgb_to_lab",
    "save_png",
    "save_tensor",
    "tensor_from_bytes",
    "tensor_to_bytes",
    "__version__",
]
