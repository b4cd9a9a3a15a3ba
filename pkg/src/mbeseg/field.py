"""Discrete calculus on 2D periodic grids.

Fields are plain ``numpy`` arrays of shape ``(N, M)``: axis 0 runs over the
``y`` index ``j`` (rows, height N) and axis 1 over the ``x`` index ``i``
(columns, width M). Grid spacing is 1 and every operator wraps around
periodically, so ``f[j, i + M] == f[j, i]``.

Vector fields are ``(u, v)`` tuples holding the x- and y-components.
"""

from functools import lru_cache
import math

import numpy as np

from .errors import GridError, ParameterError

#: divisor floor for unit normals and the DR1 coefficient
GRAD_FLOOR = 1e-8

_AXES = {"x": 1, "y": 0}


def check_field(f, name="field"):
    """Return ``f`` as a float64 array after validating its shape."""
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim != 2:
        raise GridError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise GridError(f"{name} needs both dimensions >= 2, got {arr.shape}")
    return arr


def _axis(axis):
    try:
        return _AXES[axis]
    except KeyError:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}") from None


def diff_forward(f, axis):
    """Periodic forward difference ``f[i+1] - f[i]`` along ``axis``."""
    f = check_field(f)
    ax = _axis(axis)
    return np.roll(f, -1, axis=ax) - f


def diff_backward(f, axis):
    """Periodic backward difference ``f[i] - f[i-1]`` along ``axis``."""
    f = check_field(f)
    ax = _axis(axis)
    return f - np.roll(f, 1, axis=ax)


def diff_central(f, axis):
    """Average of the forward and backward differences."""
    f = check_field(f)
    ax = _axis(axis)
    return 0.5 * (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax))


def gradient_central(f):
    """Central-difference gradient ``(u, v)``."""
    return diff_central(f, "x"), diff_central(f, "y")


def divergence_central(w):
    """Central-difference divergence of the vector field ``w = (u, v)``."""
    u, v = w
    u = check_field(u, "u")
    v = check_field(v, "v")
    if u.shape != v.shape:
        raise GridError(f"component shapes differ: {u.shape} vs {v.shape}")
    return diff_central(u, "x") + diff_central(v, "y")


def laplacian(f):
    """Compact 5-point Laplacian, ``d+x d-x f + d+y d-y f``."""
    f = check_field(f)
    return (np.roll(f, 1, 0) + np.roll(f, -1, 0)
            + np.roll(f, 1, 1) + np.roll(f, -1, 1) - 4.0 * f)


def biharmonic(f):
    """Square of the 5-point Laplacian."""
    return laplacian(laplacian(f))


def gradient_magnitude(f, floor=0.0):
    """Length of the central gradient, clipped from below at ``floor``.

    ``floor=0`` gives the raw magnitude (reporting maps); a positive floor is
    used wherever the magnitude ends up in a denominator.
    """
    u, v = gradient_central(f)
    mag = np.sqrt(u * u + v * v)
    if floor > 0:
        mag = np.maximum(mag, floor)
    return mag


@lru_cache(maxsize=32)
def _gaussian_kernel_hat(shape, sigma):
    """rfft2 of the truncated, renormalised Gaussian wrapped onto the grid."""
    offsets, w2 = gaussian_weights(sigma)
    rows, cols = shape
    kernel = np.zeros(shape)
    # np.add.at folds offsets larger than the grid back onto the torus.
    jj = np.mod(offsets, rows)[:, None]
    ii = np.mod(offsets, cols)[None, :]
    np.add.at(kernel, (np.broadcast_to(jj, w2.shape), np.broadcast_to(ii, w2.shape)), w2)
    hat = np.fft.rfft2(kernel)
    hat.flags.writeable = False
    return hat


def gaussian_weights(sigma):
    """Offsets and 2-D weights of the discrete kernel (sums to 1)."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(4.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    d2 = offsets[:, None] ** 2 + offsets[None, :] ** 2
    w = np.exp(-d2 / (2.0 * sigma * sigma))
    return offsets, w / w.sum()


def convolve_gaussian(f, sigma):
    """Periodic convolution with a normalised Gaussian of width ``sigma``.

    The kernel is sampled on the square window ``|dx|, |dy| <= ceil(4 sigma)``
    and scaled so its weights sum to one; constants are therefore preserved.
    The product is evaluated with real FFTs.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    f = check_field(f)
    hat = _gaussian_kernel_hat(f.shape, float(sigma))
    return np.fft.irfft2(np.fft.rfft2(f) * hat, s=f.shape)


def convolve_gaussian_many(fields, sigma):
    """:func:`convolve_gaussian` applied to a stack of same-shape fields."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    stack = np.asarray(fields, dtype=np.float64)
    if stack.ndim != 3:
        raise GridError(f"expected a stack of 2-D fields, got shape {stack.shape}")
    shape = stack.shape[1:]
    check_field(stack[0])
    hat = _gaussian_kernel_hat(shape, float(sigma))
    return np.fft.irfft2(np.fft.rfft2(stack) * hat, s=shape)
