"""Tensor container I/O, PNG decode/encode, and CIELAB color conversion.

All other modules exchange arrays either in memory (numpy) or on disk in the
SPTN container format:

    magic "SPTN" | u8 version=1 | u8 dtype | u8 ndim | u8 pad=0
    ndim * u32 dims | raw row-major payload

All integers little-endian. dtype codes: 0=f32, 1=i32, 2=u8.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

SPTN_MAGIC = b"SPTN"
SPTN_VERSION = 1

_DTYPE_TO_CODE = {
    np.dtype("float32"): 0,
    np.dtype("int32"): 1,
    np.dtype("uint8"): 2,
}
_CODE_TO_DTYPE = {
    0: np.dtype("<f4"),
    1: np.dtype("<i4"),
    2: np.dtype("u1"),
}


class SptnError(ValueError):
    """Malformed SPTN container (bad magic, truncation, unknown dtype...)."""


def _check_tensor(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t)
    if t.dtype not in _DTYPE_TO_CODE:
        raise SptnError(f"unsupported dtype {t.dtype}; expected f32, i32 or u8")
    if t.ndim == 0:
        raise SptnError("empty shape: tensors must have at least one dimension")
    if t.ndim > 255:
        raise SptnError("too many dimensions for SPTN header")
    if any(d < 1 for d in t.shape):
        raise SptnError(f"all dimensions must be >= 1, got shape {t.shape}")
    return t


def tensor_to_bytes(t: np.ndarray) -> bytes:
    """Serialize an array to SPTN bytes. Round trip is bit-exact."""
    t = _check_tensor(t)
    header = SPTN_MAGIC + struct.pack(
        "<BBBB", SPTN_VERSION, _DTYPE_TO_CODE[t.dtype], t.ndim, 0
    )
    dims = struct.pack(f"<{t.ndim}I", *t.shape)
    payload = np.ascontiguousarray(t).astype(t.dtype.newbyteorder("<")).tobytes()
    return header + dims + payload


def tensor_from_bytes(raw: bytes) -> np.ndarray:
    """Parse SPTN bytes, validating header fields against the payload."""
    if len(raw) < 8:
        raise SptnError(f"file too short for SPTN header ({len(raw)} bytes)")
    if raw[:4] != SPTN_MAGIC:
        raise SptnError(f"bad magic {raw[:4]!r}, expected {SPTN_MAGIC!r}")
    version, dtype_code, ndim, pad = struct.unpack("<BBBB", raw[4:8])
    if version != SPTN_VERSION:
        raise SptnError(f"unsupported SPTN version {version}")
    if dtype_code not in _CODE_TO_DTYPE:
        raise SptnError(f"unknown dtype code {dtype_code}")
    if ndim < 1:
        raise SptnError("empty shape: ndim must be >= 1")
    dims_end = 8 + 4 * ndim
    if len(raw) < dims_end:
        raise SptnError("file truncated inside dimension list")
    shape = struct.unpack(f"<{ndim}I", raw[8:dims_end])
    if any(d < 1 for d in shape):
        raise SptnError(f"all dimensions must be >= 1, got shape {shape}")
    dtype = _CODE_TO_DTYPE[dtype_code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    payload = raw[dims_end:]
    if len(payload) != expected:
        raise SptnError(
            f"payload length {len(payload)} does not match "
            f"shape {shape} ({expected} bytes expected)"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    # native byte order, writable copy
    return arr.astype(dtype.newbyteorder("="))


def save_tensor(t: np.ndarray, path: str | Path) -> None:
    """Write an f32/i32/u8 array to ``path`` in SPTN format."""
    Path(path).write_bytes(tensor_to_bytes(t))


def load_tensor(path: str | Path) -> np.ndarray:
    """Read an SPTN file back into a numpy array."""
    return tensor_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# PNG images
# ---------------------------------------------------------------------------

def load_png(path: str | Path) -> np.ndarray:
    """Decode a PNG into an (H, W, 3) uint8 RGB array.

    Grayscale and palette images are expanded to RGB.
    """
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[0] < 1 or rgb.shape[1] < 1:
        raise ValueError(f"cannot decode {path} as an RGB image")
    return rgb


def decode_png_bytes(raw: bytes) -> np.ndarray:
    """Decode in-memory PNG bytes to (H, W, 3) uint8 RGB."""
    import io

    with Image.open(io.BytesIO(raw)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_png(rgb: np.ndarray, path: str | Path) -> None:
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) uint8, got shape {rgb.shape}")
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")


def encode_png_bytes(rgb: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(
        buf, format="PNG"
    )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# CIELAB conversion (sRGB, D65 white point)
# ---------------------------------------------------------------------------

# sRGB -> XYZ matrix and its inverse, D65 reference white.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE = np.array([0.95047, 1.0, 1.08883])
_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


@dataclass
class LabImage:
    """CIELAB planes: L in [0, 100], a/b chrominance in [-128, 127]."""

    L: np.ndarray  # (H, W) float32
    a: np.ndarray
    b: np.ndarray

    @property
    def height(self) -> int:
        return self.L.shape[0]

    @property
    def width(self) -> int:
        return self.L.shape[1]

    def ab_stack(self) -> np.ndarray:
        """Chrominance as an (H, W, 2) array."""
        return np.stack([self.a, self.b], axis=-1)


def rgb_to_lab(rgb: np.ndarray) -> LabImage:
    """Convert (H, W, 3) uint8 sRGB to CIELAB. Purely per-pixel."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3), got shape {rgb.shape}")
    c = rgb.astype(np.float64) / 255.0
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T
    ratio = xyz / _WHITE
    f = np.where(ratio > _EPS, np.cbrt(ratio), (_KAPPA * ratio + 16.0) / 116.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return LabImage(
        L=L.astype(np.float32), a=a.astype(np.float32), b=b.astype(np.float32)
    )


def lab_to_rgb(lab: LabImage) -> np.ndarray:
    """Convert CIELAB back to (H, W, 3) uint8 sRGB, clamping out-of-gamut."""
    L = lab.L.astype(np.float64)
    a = lab.a.astype(np.float64)
    b = lab.b.astype(np.float64)
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0

    def _finv(f):
        f3 = f**3
        return np.where(f3 > _EPS, f3, (116.0 * f - 16.0) / _KAPPA)

    xyz = np.stack([_finv(fx), _finv(fy), _finv(fz)], axis=-1) * _WHITE
    linear = xyz @ _XYZ_TO_RGB.T
    linear = np.clip(linear, 0.0, None)
    c = np.where(
        linear <= 0.0031308, 12.92 * linear, 1.055 * linear ** (1.0 / 2.4) - 0.055
    )
    return np.clip(np.rint(c * 255.0), 0, 255).astype(np.uint8)
