"""Synthetic test images with ground-truth masks, and overlap metrics.

Images are on a 0-255 real scale (foreground 170, background 85 by
default), optionally with an additive bias field and Gaussian noise. Values
are never clamped.
"""

from dataclasses import dataclass, field, asdict
import json
import math

import numpy as np

from .errors import FixtureError, MaskError, ParameterError
from .field import convolve_gaussian
from .images import save_png16
from .levelset import Annulus, Disk, Polygon, Rectangle, rasterize

KINDS = ("two_shapes", "ring", "star_corners", "blurred_boundary")


@dataclass(frozen=True)
class Bias:
    """``none``, ``linear`` (``gain`` = left-to-right intensity swing) or
    ``radial_gaussian`` (``amplitude`` peak at the image centre, width
    ``sigma_b``)."""

    kind: str = "none"
    gain: float = 0.0
    sigma_b: float = 0.0
    amplitude: float = 0.0


@dataclass(frozen=True)
class FixtureSpec:
    kind: str = "ring"
    size: tuple = (128, 128)          # (M, N): width, height
    bias: Bias = field(default_factory=Bias)
    noise_std: float = 0.0
    seed: int = 0
    inner_radius: float = 18.0        # ring only
    outer_radius: float = 34.0        # ring only
    blur: float = 3.0                 # blurred_boundary only
    foreground: float = 170.0
    background: float = 85.0

    @property
    def grid_shape(self):
        m, n = self.size
        return (n, m)


def fixture_shapes(spec):
    """Geometric primitives whose union is the foreground of ``spec``."""
    m, n = spec.size
    s = min(m, n)
    cx, cy = (m - 1) / 2.0, (n - 1) / 2.0
    if spec.kind == "two_shapes":
        return [Disk(0.3 * m, 0.32 * n, 0.16 * s),
                Rectangle(round(0.55 * m), round(0.52 * n), round(0.85 * m), round(0.8 * n))]
    if spec.kind == "ring":
        return [Annulus(cx, cy, spec.inner_radius, spec.outer_radius)]
    if spec.kind == "star_corners":
        outer, inner = 0.38 * s, 0.17 * s
        verts = []
        for k in range(10):
            rad = outer if k % 2 == 0 else inner
            ang = -math.pi / 2 + k * math.pi / 5
            verts.append((cx + rad * math.cos(ang), cy + rad * math.sin(ang)))
        return [Polygon(tuple(verts))]
    if spec.kind == "blurred_boundary":
        return [Disk(cx, cy, 0.3 * s)]
    raise FixtureError(f"unknown fixture kind {spec.kind!r}; choose from {KINDS}")


def truth_mask(spec):
    """Exact rasterised foreground as a boolean array of shape ``(N, M)``."""
    m, n = spec.size
    if m < 8 or n < 8:
        raise FixtureError(f"fixture grid {spec.size} too small")
    mask = np.zeros(spec.grid_shape, dtype=bool)
    try:
        for shape in fixture_shapes(spec):
            mask |= rasterize(shape, spec.grid_shape)
    except ParameterError as exc:
        raise FixtureError(str(exc)) from exc
    if not mask.any() or mask.all():
        raise FixtureError(f"{spec.kind} fixture is empty or fills the grid")
    return mask


def bias_field(spec):
    n, m = spec.grid_shape
    b = spec.bias
    if b.kind == "none":
        return np.zeros((n, m))
    yy, xx = np.mgrid[0:n, 0:m].astype(np.float64)
    if b.kind == "linear":
        return b.gain * (xx / (m - 1) - 0.5)
    if b.kind == "radial_gaussian":
        if not b.sigma_b > 0:
            raise FixtureError("radial_gaussian bias needs sigma_b > 0")
        cx, cy = (m - 1) / 2.0, (n - 1) / 2.0
        return b.amplitude * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * b.sigma_b ** 2))
    raise FixtureError(f"unknown bias kind {b.kind!r}")


def noise_field(shape, std, seed):
    """Gaussian noise from a counter-based (Philox) generator."""
    if std == 0:
        return np.zeros(shape)
    rng = np.random.Generator(np.random.Philox(int(seed)))
    return std * rng.standard_normal(shape)


def generate(spec):
    """Return ``(image, truth)``; ``truth`` is a 0/1 float field."""
    if spec.noise_std < 0:
        raise FixtureError(f"noise_std must be >= 0, got {spec.noise_std}")
    mask = truth_mask(spec)
    base = np.where(mask, spec.foreground, spec.background).astype(np.float64)
    if spec.kind == "blurred_boundary" and spec.blur > 0:
        base = convolve_gaussian(base, spec.blur)
    image = base + bias_field(spec) + noise_field(spec.grid_shape, spec.noise_std, spec.seed)
    return image, mask.astype(np.float64)


def spec_to_dict(spec):
    d = asdict(spec)
    d["size"] = list(spec.size)
    return d


def export_fixture(spec, directory, stem="fixture"):
    """Write image (16-bit PNG), truth mask (8-bit PNG) and a JSON sidecar."""
    from pathlib import Path
    from .images import save_image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    image, truth = generate(spec)
    lo, hi = float(image.min()), float(image.max())
    img_path = directory / f"{stem}.png"
    save_png16(img_path, image, lo, hi)
    save_image(directory / f"{stem}_truth.png", truth * 255.0)
    sidecar = {"spec": spec_to_dict(spec), "png16_scale": {"lo": lo, "hi": hi},
               "note": "value = lo + (hi - lo) * png / 65535"}
    (directory / f"{stem}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return img_path


# --- metrics -------------------------------------------------------------------

def _as_binary(mask, name):
    arr = np.asarray(mask)
    if arr.dtype != bool:
        if not np.all((arr == 0) | (arr == 1)):
            raise MaskError(f"{name} is not binary")
        arr = arr.astype(bool)
    return arr


def _pair(a, b):
    a = _as_binary(a, "mask_a")
    b = _as_binary(b, "mask_b")
    if a.shape != b.shape:
        raise MaskError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a, b


def dice(mask_a, mask_b):
    """``2|A & B| / (|A| + |B|)``; two empty masks score 1."""
    a, b = _pair(mask_a, mask_b)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / total


def iou(mask_a, mask_b):
    """``|A & B| / |A | B|``; two empty masks score 1."""
    a, b = _pair(mask_a, mask_b)
    union = int((a | b).sum())
    if union == 0:
        return 1.0
    return int((a & b).sum()) / union
