"""Grayscale image loading, saving, and preprocessing.

Images are plain 2-D float arrays (row-major, y first). Integer formats are
scaled to [0, 1] by their dtype maximum on load. The preprocessing used before
detection is Gaussian smoothing followed by a saturation-bounded contrast
stretch to [0, 1]; the stretch pins the detection threshold to a stable
intensity scale when the acquisition renormalizes every collection.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np
from scipy import ndimage

RAW_HEADER_LEN = 8  # u32 width + u32 height, little-endian

__all__ = [
    "load_image",
    "save_image",
    "read_raw",
    "write_raw",
    "raw_from_bytes",
    "contrast_stretch",
    "smooth",
    "preprocess",
]


def _as_image(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"expected a single-channel 2-D image, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty image")
    arr = arr.astype(np.float32, copy=False)
    if not np.isfinite(arr).all():
        raise ValueError("image contains NaN or Inf values")
    return arr


def raw_from_bytes(data: bytes, label: str = "raw image") -> np.ndarray:
    """Decode the raw float format: LE u32 width, u32 height, then w*h float32."""
    if len(data) < RAW_HEADER_LEN:
        raise ValueError(f"{label}: truncated raw header")
    width, height = struct.unpack_from("<II", data, 0)
    expected = RAW_HEADER_LEN + 4 * width * height
    if width < 1 or height < 1:
        raise ValueError(f"{label}: invalid raw dimensions {width}x{height}")
    if len(data) != expected:
        raise ValueError(f"{label}: expected {expected} bytes, found {len(data)}")
    flat = np.frombuffer(data, dtype="<f4", offset=RAW_HEADER_LEN)
    return _as_image(flat.reshape(height, width))


def read_raw(path) -> np.ndarray:
    return raw_from_bytes(Path(path).read_bytes(), label=str(path))


def write_raw(path, img: np.ndarray) -> None:
    img = _as_image(img)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<II", w, h))
        f.write(np.ascontiguousarray(img, dtype="<f4").tobytes())


def load_image(path) -> np.ndarray:
    """Load a grayscale image as float32.

    Supported inputs: 8/16-bit grayscale PNG or TIFF (integer values divided
    by the dtype maximum), or the raw float format written by `write_raw`
    (values passed through unchanged). Multi-channel files are rejected
    rather than silently converted.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such image: {path}")
    if p.suffix.lower() in (".raw", ".bin"):
        return read_raw(p)

    import imageio.v3 as iio

    try:
        arr = iio.imread(p)
    except Exception as exc:
        raise ValueError(f"unreadable image {path}: {exc}") from exc
    if arr.ndim != 2:
        raise ValueError(
            f"{path}: multi-channel image (shape {arr.shape}); convert to grayscale first"
        )
    if arr.dtype == np.uint8:
        return _as_image(arr.astype(np.float32) / 255.0)
    if arr.dtype == np.uint16:
        return _as_image(arr.astype(np.float32) / 65535.0)
    raise ValueError(f"{path}: unsupported bit depth {arr.dtype}; expected uint8 or uint16")


def save_image(path, img: np.ndarray) -> None:
    """Write an image in [0, 1] as 16-bit grayscale PNG (values * 65535, rounded)."""
    img = _as_image(img)
    quantized = np.clip(np.rint(img.astype(np.float64) * 65535.0), 0, 65535).astype(np.uint16)

    import imageio.v3 as iio

    iio.imwrite(Path(path), quantized)


def _nearest_rank(sorted_vals: np.ndarray, q: float) -> float:
    # Nearest-rank quantile on the pre-sorted array: smallest value with at
    # least a fraction q of the data at or below it (q=0 gives the minimum).
    n = sorted_vals.size
    idx = min(max(math.ceil(q * n) - 1, 0), n - 1)
    return float(sorted_vals[idx])


def contrast_stretch(img: np.ndarray, saturation: float = 0.0035) -> np.ndarray:
    """Linearly rescale to [0, 1] so `saturation` of pixels clip at the ends.

    The saturated fraction is split evenly between the two tails: lo/hi are
    the saturation/2 and 1-saturation/2 nearest-rank quantiles, and output is
    clamp((v - lo) / (hi - lo), 0, 1). A constant image (hi == lo) maps to
    all zeros.
    """
    img = _as_image(img)
    if not 0.0 <= saturation < 0.5:
        raise ValueError(f"saturation must be in [0, 0.5), got {saturation}")
    flat = np.sort(img, axis=None)
    lo = _nearest_rank(flat, saturation / 2.0)
    hi = _nearest_rank(flat, 1.0 - saturation / 2.0)
    if hi <= lo:
        return np.zeros_like(img)
    out = (img - np.float32(lo)) / np.float32(hi - lo)
    return np.clip(out, 0.0, 1.0)


def smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian smoothing with reflect boundary; sigma=0 is a no-op."""
    img = _as_image(img)
    if sigma < 0:
        raise ValueError(f"smoothing sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img
    # reflect mode repeats the edge sample, matching the convolution backends
    return ndimage.gaussian_filter(img, sigma, mode="reflect", truncate=5.0).astype(
        np.float32, copy=False
    )


def preprocess(
    img: np.ndarray, smooth_sigma: float = 1.0, saturation: float = 0.0035
) -> np.ndarray:
    """Smooth, then contrast stretch to [0, 1]."""
    return contrast_stretch(smooth(img, smooth_sigma), saturation)
