"""Grayscale image I/O on the 0-255 real intensity scale."""

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageFormatError

_EIGHT_BIT = {"L"}
_SIXTEEN_BIT = {"I;16", "I;16B", "I;16L", "I"}


def load_image(path):
    """Read an 8/16-bit grayscale PNG or binary PGM into a float64 array.

    8-bit samples keep their value; 16-bit samples are divided by 257 so the
    full range maps onto [0, 255]. Colour, palette and alpha images raise
    :class:`ImageFormatError`.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            fmt = im.format
            mode = im.mode
            if fmt not in ("PNG", "PPM"):
                raise ImageFormatError(f"{path}: unsupported format {fmt}")
            if mode in _EIGHT_BIT:
                return np.asarray(im, dtype=np.float64).copy()
            if mode in _SIXTEEN_BIT:
                return np.asarray(im, dtype=np.float64) / 257.0
            if mode == "1":
                return np.asarray(im, dtype=np.float64) * 255.0
    except (UnidentifiedImageError, OSError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise ImageFormatError(f"{path}: {exc}") from exc
    raise ImageFormatError(f"{path}: colour or alpha image (mode {mode}); convert to grayscale first")


def to_uint8(values, lo=0.0, hi=255.0):
    """Linearly map [lo, hi] onto 0..255, clipping and rounding."""
    values = np.asarray(values, dtype=np.float64)
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = (values - lo) * (255.0 / (hi - lo))
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def save_image(path, values):
    """Write an 8-bit grayscale PNG from values on the 0-255 scale."""
    Image.fromarray(to_uint8(values), mode="L").save(path, format="PNG")


def save_png16(path, values, lo, hi):
    """Write a 16-bit grayscale PNG mapping [lo, hi] onto 0..65535."""
    values = np.asarray(values, dtype=np.float64)
    if hi <= lo:
        data = np.zeros(values.shape, dtype=np.uint16)
    else:
        data = np.clip(np.rint((values - lo) * (65535.0 / (hi - lo))), 0, 65535).astype(np.uint16)
    Image.fromarray(data).save(path, format="PNG")


def save_pgm(path, values):
    """Write a binary (P5) 8-bit PGM."""
    data = to_uint8(values)
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
