"""Level-set bookkeeping: Heaviside and Dirac approximations, initial level
sets, zero-contour extraction and region masks.

Sign convention: the object interior carries ``phi > 0`` so that the
region-1 mask is ``H(phi)``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DegenerateInitError, ParameterError
from .field import check_field

__all__ = [
    "DiracSpec", "Rectangle", "Disk", "Annulus", "Polygon", "MaskShape", "InitSpec",
    "heaviside_sharp", "heaviside_smooth", "dirac", "dirac_derivative",
    "rasterize", "distance_transform", "signed_distance", "init_level_set",
    "extract_zero_contour", "contour_length", "region_masks",
]


@dataclass(frozen=True)
class DiracSpec:
    """Smoothed delta: ``compact`` (cosine bump) or ``rational`` (Cauchy)."""

    variant: str = "rational"
    epsilon: float = 1.0

    def __post_init__(self):
        if self.variant not in ("compact", "rational"):
            raise ParameterError(f"unknown Dirac variant {self.variant!r}")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")


def heaviside_sharp(p):
    """1 where ``p >= 0`` else 0 (so ``H(0) = 1``)."""
    out = (np.asarray(p) >= 0).astype(np.float64)
    return out if out.ndim else float(out)


def dirac(p, spec=DiracSpec()):
    p = np.asarray(p, dtype=np.float64)
    eps = spec.epsilon
    if spec.variant == "rational":
        out = (eps / math.pi) / (eps * eps + p * p)
    else:
        inside = np.abs(p) <= eps
        out = np.where(inside, (1.0 + np.cos(math.pi * p / eps)) / (2.0 * eps), 0.0)
    return out if out.ndim else float(out)


def dirac_derivative(p, spec=DiracSpec()):
    """d/dp of :func:`dirac`."""
    p = np.asarray(p, dtype=np.float64)
    eps = spec.epsilon
    if spec.variant == "rational":
        den = eps * eps + p * p
        out = -(2.0 * eps / math.pi) * p / (den * den)
    else:
        inside = np.abs(p) <= eps
        out = np.where(inside, -math.pi * np.sin(math.pi * p / eps) / (2.0 * eps * eps), 0.0)
    return out if out.ndim else float(out)


def heaviside_smooth(p, spec=DiracSpec()):
    """Antiderivative of :func:`dirac` normalised to run from 0 to 1.

    Rational variant: ``1/2 + arctan(p/eps)/pi``. Compact variant: the
    usual ``1/2 (1 + p/eps + sin(pi p/eps)/pi)`` clipped to [0, 1].
    """
    p = np.asarray(p, dtype=np.float64)
    eps = spec.epsilon
    if spec.variant == "rational":
        out = 0.5 + np.arctan(p / eps) / math.pi
    else:
        q = np.clip(p / eps, -1.0, 1.0)
        out = 0.5 * (1.0 + q + np.sin(math.pi * q) / math.pi)
    return out if out.ndim else float(out)


# --- initial level sets ---------------------------------------------------

@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned box; pixel centres with x0 <= x <= x1, y0 <= y <= y1."""

    x0: float
    y0: float
    x1: float
    y1: float


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    radius: float


@dataclass(frozen=True)
class Annulus:
    cx: float
    cy: float
    r_in: float
    r_out: float


@dataclass(frozen=True)
class Polygon:
    """Closed polygon given as ``((x, y), ...)`` vertices (even-odd fill)."""

    vertices: tuple


@dataclass(frozen=True)
class MaskShape:
    """Shape read from an 8-bit grayscale image; nonzero pixels are interior."""

    path: str


@dataclass(frozen=True)
class InitSpec:
    shape: object
    mode: str = "binary_step"
    c: float = 2.0

    def __post_init__(self):
        if self.mode not in ("binary_step", "signed_distance"):
            raise ParameterError(f"unknown init mode {self.mode!r}")
        if not self.c > 0:
            raise ParameterError(f"binary step magnitude c must be positive, got {self.c}")


def rasterize(shape, grid_shape):
    """Boolean interior mask of ``shape`` on a grid of ``grid_shape = (N, M)``."""
    rows, cols = grid_shape
    yy, xx = np.mgrid[0:rows, 0:cols]
    if isinstance(shape, Rectangle):
        if not (0 <= shape.x0 <= shape.x1 <= cols - 1 and 0 <= shape.y0 <= shape.y1 <= rows - 1):
            raise ParameterError(f"{shape} lies outside the {cols}x{rows} grid")
        return (xx >= shape.x0) & (xx <= shape.x1) & (yy >= shape.y0) & (yy <= shape.y1)
    if isinstance(shape, Disk):
        r = shape.radius
        if not (r > 0 and shape.cx - r >= 0 and shape.cx + r <= cols - 1
                and shape.cy - r >= 0 and shape.cy + r <= rows - 1):
            raise ParameterError(f"{shape} lies outside the {cols}x{rows} grid")
        return (xx - shape.cx) ** 2 + (yy - shape.cy) ** 2 <= r * r
    if isinstance(shape, Annulus):
        if not (0 <= shape.r_in < shape.r_out and shape.cx - shape.r_out >= 0
                and shape.cx + shape.r_out <= cols - 1 and shape.cy - shape.r_out >= 0
                and shape.cy + shape.r_out <= rows - 1):
            raise ParameterError(f"{shape} lies outside the {cols}x{rows} grid or has r_in >= r_out")
        d2 = (xx - shape.cx) ** 2 + (yy - shape.cy) ** 2
        return (d2 <= shape.r_out ** 2) & (d2 > shape.r_in ** 2)
    if isinstance(shape, Polygon):
        verts = np.asarray(shape.vertices, dtype=np.float64)
        if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 2:
            raise ParameterError("polygon needs at least three (x, y) vertices")
        if (verts[:, 0].min() < 0 or verts[:, 0].max() > cols - 1
                or verts[:, 1].min() < 0 or verts[:, 1].max() > rows - 1):
            raise ParameterError(f"polygon lies outside the {cols}x{rows} grid")
        return _point_in_polygon(xx, yy, verts)
    if isinstance(shape, MaskShape):
        from .images import load_image

        img = load_image(shape.path)
        if img.shape != tuple(grid_shape):
            raise ParameterError(
                f"mask {shape.path} has shape {img.shape}, grid is {tuple(grid_shape)}")
        return img != 0
    raise ParameterError(f"unsupported shape {shape!r}")


def _point_in_polygon(xx, yy, verts):
    inside = np.zeros(xx.shape, dtype=bool)
    x0, y0 = verts[-1]
    for x1, y1 in verts:
        straddles = (y1 > yy) != (y0 > yy)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = x0 + (yy - y0) * (x1 - x0) / (y1 - y0)
        inside ^= straddles & (xx < x_cross)
        x0, y0 = x1, y1
    return inside


def _edt_1d(f):
    """Lower envelope of parabolas: squared distance transform of one line.

    ``f`` holds 0 on feature pixels and ``inf`` elsewhere (or the output of a
    previous pass); returns ``min_q (p - q)^2 + f[q]``.
    """
    vals = f.tolist()
    n = len(vals)
    sites = [q for q in range(n) if vals[q] != math.inf]
    if not sites:
        return np.full(n, np.inf)
    v = [sites[0]]          # parabola apexes in the envelope
    z = [-math.inf]         # left boundary of each parabola's interval
    for q in sites[1:]:
        fq = vals[q] + q * q
        while True:
            p = v[-1]
            s = (fq - (vals[p] + p * p)) / (2.0 * (q - p))
            if s <= z[-1]:
                v.pop()
                z.pop()
            else:
                break
        v.append(q)
        z.append(s)
    out = np.empty(n)
    k = 0
    last = len(v) - 1
    for q in range(n):
        while k < last and z[k + 1] < q:
            k += 1
        p = v[k]
        out[q] = (q - p) ** 2 + vals[p]
    return out


def distance_transform(features):
    """Exact Euclidean distance from every pixel to the nearest ``True`` pixel.

    Two separable passes of the 1-D lower-envelope transform (columns, then
    rows). Distances are planar; the grid is not wrapped.
    """
    features = np.asarray(features, dtype=bool)
    f = np.where(features, 0.0, np.inf)
    tmp = np.empty_like(f)
    for i in range(f.shape[1]):
        tmp[:, i] = _edt_1d(f[:, i])
    out = np.empty_like(f)
    for j in range(f.shape[0]):
        out[j, :] = _edt_1d(tmp[j, :])
    return np.sqrt(out)


def signed_distance(mask):
    """Signed distance to the boundary of ``mask``, positive inside.

    Each region gets the distance to the nearest pixel of the other region,
    shifted by half a pixel so the zero level sits between pixel centres.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any() or mask.all():
        raise DegenerateInitError("signed distance needs both interior and exterior pixels")
    d_in = distance_transform(~mask)    # inside pixels: distance to exterior
    d_out = distance_transform(mask)    # outside pixels: distance to interior
    return np.where(mask, d_in - 0.5, -(d_out - 0.5))


def init_level_set(grid_shape, spec):
    """Initial level set on a ``(N, M)`` grid from an :class:`InitSpec`."""
    rows, cols = grid_shape
    if rows < 2 or cols < 2:
        raise ParameterError(f"grid must be at least 2x2, got {grid_shape}")
    mask = rasterize(spec.shape, grid_shape)
    if not mask.any() or mask.all():
        raise DegenerateInitError(f"{spec.shape} covers {'none' if not mask.any() else 'all'} of the grid")
    if spec.mode == "binary_step":
        return np.where(mask, spec.c, -spec.c).astype(np.float64)
    return signed_distance(mask)


# --- zero contour -----------------------------------------------------------

def _crossing(phi, key):
    kind, r, c = key
    p = phi[r, c]
    if kind == "h":
        q = phi[r, c + 1]
        t = p / (p - q)
        return (c + t, float(r))
    q = phi[r + 1, c]
    t = p / (p - q)
    return (float(c), r + t)


def extract_zero_contour(phi):
    """Marching squares on the zero level set of ``phi``.

    Returns a list of ``(K, 2)`` arrays of ``(x, y)`` vertices. Vertices are
    linear interpolants of the zero crossing along cell edges. Saddle cells
    are split according to the sign of the cell-average value. Closed loops
    repeat their first vertex at the end. Only cells between adjacent pixel
    centres are visited; the periodic wrap cells are not.
    """
    phi = check_field(phi, "phi")
    pos = phi >= 0
    rows, cols = phi.shape
    a = pos[:-1, :-1]
    b = pos[:-1, 1:]
    d = pos[1:, 1:]
    e = pos[1:, :-1]
    mixed = ~((a == b) & (b == d) & (d == e))
    segments = []
    for r, c in zip(*np.nonzero(mixed)):
        T = ("h", r, c)
        R = ("v", r, c + 1)
        B = ("h", r + 1, c)
        L = ("v", r, c)
        ca, cb, cd, ce = pos[r, c], pos[r, c + 1], pos[r + 1, c + 1], pos[r + 1, c]
        crossing = [edge for edge, flag in ((T, ca != cb), (R, cb != cd), (B, ce != cd), (L, ca != ce)) if flag]
        if len(crossing) == 2:
            segments.append(tuple(crossing))
            continue
        # saddle: cut off the corners whose sign differs from the cell average
        centre = 0.25 * (phi[r, c] + phi[r, c + 1] + phi[r + 1, c + 1] + phi[r + 1, c]) >= 0
        for corner, e1, e2 in ((ca, T, L), (cb, T, R), (cd, R, B), (ce, B, L)):
            if corner != centre:
                segments.append((e1, e2))

    incident = {}
    for idx, (e1, e2) in enumerate(segments):
        incident.setdefault(e1, []).append(idx)
        incident.setdefault(e2, []).append(idx)

    used = np.zeros(len(segments), dtype=bool)

    def walk(start_edge, seg):
        chain = [start_edge]
        edge = start_edge
        while seg is not None and not used[seg]:
            used[seg] = True
            e1, e2 = segments[seg]
            edge = e2 if e1 == edge else e1
            chain.append(edge)
            nxt = [s for s in incident[edge] if not used[s]]
            seg = nxt[0] if nxt else None
        return chain

    polylines = []
    # open chains start at edges touched by a single segment (grid border)
    ends = sorted(e for e, segs in incident.items() if len(segs) == 1)
    for edge in ends:
        seg = incident[edge][0]
        if used[seg]:
            continue
        chain = walk(edge, seg)
        polylines.append(np.array([_crossing(phi, k) for k in chain]))
    for seg in range(len(segments)):
        if used[seg]:
            continue
        chain = walk(segments[seg][0], seg)
        polylines.append(np.array([_crossing(phi, k) for k in chain]))
    return polylines


def contour_length(polylines):
    """Total Euclidean length of a list of polylines."""
    return float(sum(np.sum(np.hypot(*np.diff(p, axis=0).T)) for p in polylines if len(p) > 1))


def region_masks(phi):
    """Sharp masks ``(H(phi), 1 - H(phi))``."""
    m1 = heaviside_sharp(check_field(phi, "phi"))
    return m1, 1.0 - m1
