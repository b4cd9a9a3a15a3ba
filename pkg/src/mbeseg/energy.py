"""Energies and their force fields.

Every ``*_force`` returns the right-hand side of the corresponding L2
gradient flow, i.e. minus the variational derivative of the matching
``*_energy``. Inner products are plain sums over the grid (h = 1).

Curvature-type forces (GAC length, RSF arc length) come in two
discretisations selected by ``form``:

``"variational"``
    ``div(w delta(phi) grad phi/|grad phi|) - w delta'(phi) |grad phi|``, the
    exact derivative of the discrete energy ``sum w delta(phi) |grad phi|``.
    In the continuum it equals the product form below.
``"curvature"``
    ``delta(phi) div(w grad phi/|grad phi|)``, the literal product.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import NonPositiveEnergyError
from .field import (
    GRAD_FLOOR,
    check_field,
    convolve_gaussian,
    convolve_gaussian_many,
    divergence_central,
    gradient_central,
    laplacian,
    biharmonic,
)
from .levelset import DiracSpec, dirac, dirac_derivative, heaviside_sharp, heaviside_smooth
from .model import GAC, RSF

DENOM_FLOOR = 1e-12


def _grad_and_mag(phi):
    u, v = gradient_central(phi)
    return u, v, np.sqrt(u * u + v * v)


# --- MBE -------------------------------------------------------------------

def mbe_nonequilibrium_energy(phi):
    """``1/4 sum (|grad phi|^2 - 1)^2``."""
    _, _, s = _grad_and_mag(phi)
    return 0.25 * float(np.sum((s * s - 1.0) ** 2))


def mbe_nonequilibrium_force(phi):
    """``div((|grad phi|^2 - 1) grad phi)``."""
    u, v, s = _grad_and_mag(phi)
    k = s * s - 1.0
    return divergence_central((k * u, k * v))


def mbe_energy(phi, alpha):
    """``sum alpha/2 (Lap phi)^2 + 1/4 (|grad phi|^2 - 1)^2``."""
    lap = laplacian(phi)
    return 0.5 * alpha * float(np.sum(lap * lap)) + mbe_nonequilibrium_energy(phi)


def mbe_force(phi, alpha):
    """Slope-selection MBE flow: ``-alpha Lap^2 phi + div((|grad phi|^2-1) grad phi)``."""
    return -alpha * biharmonic(phi) + mbe_nonequilibrium_force(phi)


# --- distance regularizers ------------------------------------------------

def r1(s):
    return 0.5 * (np.asarray(s) - 1.0) ** 2


def d1(s):
    """DR1 diffusion rate ``1 - 1/s``; unbounded below as ``s -> 0``."""
    s = np.maximum(np.asarray(s, dtype=np.float64), GRAD_FLOOR)
    return 1.0 - 1.0 / s


def r2(s):
    s = np.asarray(s, dtype=np.float64)
    return np.where(s <= 1.0, (1.0 - np.cos(2.0 * math.pi * s)) / (2.0 * math.pi) ** 2,
                    0.5 * (s - 1.0) ** 2)


def d2(s):
    """Double-well rate: ``sin(2 pi s)/(2 pi s)`` for s <= 1, else ``1 - 1/s``."""
    s = np.maximum(np.asarray(s, dtype=np.float64), GRAD_FLOOR)
    return np.where(s <= 1.0, np.sin(2.0 * math.pi * s) / (2.0 * math.pi * s), 1.0 - 1.0 / s)


def dr1_energy(phi):
    _, _, s = _grad_and_mag(phi)
    return float(np.sum(r1(s)))


def dr2_energy(phi):
    _, _, s = _grad_and_mag(phi)
    return float(np.sum(r2(s)))


def dr1_force(phi):
    u, v, s = _grad_and_mag(phi)
    k = d1(s)
    return divergence_central((k * u, k * v))


def dr2_force(phi):
    u, v, s = _grad_and_mag(phi)
    k = d2(s)
    return divergence_central((k * u, k * v))


def regularizer_energy(phi, reg):
    """Full regularizer energy (without the ``mu`` weight)."""
    if reg.kind == "mbe":
        return mbe_energy(phi, reg.alpha)
    return dr1_energy(phi) if reg.kind == "dr1" else dr2_energy(phi)


def regularizer_force(phi, reg):
    """Full regularizer flow (without the ``mu`` weight)."""
    if reg.kind == "mbe":
        return mbe_force(phi, reg.alpha)
    return dr1_force(phi) if reg.kind == "dr1" else dr2_force(phi)


# --- weighted length --------------------------------------------------------

def length_energy(phi, dirac_spec=DiracSpec(), weight=None):
    """``sum w delta(phi) |grad phi|``; ``w = 1`` gives the arc length."""
    _, _, s = _grad_and_mag(phi)
    dens = dirac(phi, dirac_spec) * s
    if weight is not None:
        dens = dens * weight
    return float(np.sum(dens))


def length_force(phi, dirac_spec=DiracSpec(), weight=None, form="variational"):
    """Minus the derivative of :func:`length_energy` (see module docstring)."""
    phi = check_field(phi, "phi")
    u, v, s = _grad_and_mag(phi)
    sf = np.maximum(s, GRAD_FLOOR)
    nx, ny = u / sf, v / sf
    w = 1.0 if weight is None else weight
    delta = dirac(phi, dirac_spec)
    if form == "curvature":
        return delta * divergence_central((w * nx, w * ny))
    if form != "variational":
        raise ValueError(f"unknown form {form!r}")
    wd = w * delta
    return divergence_central((wd * nx, wd * ny)) - w * dirac_derivative(phi, dirac_spec) * s


def curvature(phi):
    """``div(grad phi / |grad phi|)`` with the floored magnitude."""
    u, v, s = _grad_and_mag(phi)
    sf = np.maximum(s, GRAD_FLOOR)
    return divergence_central((u / sf, v / sf))


# --- GAC ------------------------------------------------------------------

def edge_indicator(image, sigma_edge):
    """``g = 1 / (1 + |grad(G_sigma * I)|^2)``, in (0, 1]."""
    smooth = convolve_gaussian(image, sigma_edge)
    u, v = gradient_central(smooth)
    return 1.0 / (1.0 + u * u + v * v)


def gac_energy(phi, g, lam, gamma, dirac_spec=DiracSpec(), smooth=False):
    """``lam sum g delta(phi)|grad phi| + gamma sum g H(-phi)``.

    ``smooth=True`` swaps the sharp ``H(-phi)`` for ``1 - H_eps(phi)``, the
    antiderivative of the chosen delta, so the force is its exact gradient.
    """
    outside = 1.0 - heaviside_smooth(phi, dirac_spec) if smooth else (np.asarray(phi) <= 0)
    return lam * length_energy(phi, dirac_spec, g) + gamma * float(np.sum(g * outside))


def gac_force(phi, g, lam, gamma, dirac_spec=DiracSpec(), form="variational"):
    """``lam delta(phi) div(g grad phi/|grad phi|) + gamma g delta(phi)``."""
    return (lam * length_force(phi, dirac_spec, g, form)
            + gamma * g * dirac(phi, dirac_spec))


# --- RSF ------------------------------------------------------------------

@dataclass
class RSFFit:
    """Local intensity fits ``f1, f2`` and residual fields ``e1, e2``."""

    f1: np.ndarray
    f2: np.ndarray
    e1: np.ndarray
    e2: np.ndarray


def rsf_fit(phi, image, sigma):
    """Gaussian-windowed fits inside/outside the zero level and residuals.

    ``f_i = K*(M_i I) / K*M_i`` with the denominator floored at 1e-12 (the
    global image mean is used where the floor binds), and
    ``e_i = I^2 - 2 I (K*f_i) + K*(f_i^2)``.
    """
    phi = check_field(phi, "phi")
    image = check_field(image, "image")
    m1 = heaviside_sharp(phi)
    m2 = 1.0 - m1
    num1, den1, num2, den2 = convolve_gaussian_many([m1 * image, m1, m2 * image, m2], sigma)
    mean = float(np.mean(image))

    def ratio(num, den):
        ok = den > DENOM_FLOOR
        return np.where(ok, num / np.where(ok, den, 1.0), mean)

    f1 = ratio(num1, den1)
    f2 = ratio(num2, den2)
    k1, k1sq, k2, k2sq = convolve_gaussian_many([f1, f1 * f1, f2, f2 * f2], sigma)
    e1 = image * image - 2.0 * image * k1 + k1sq
    e2 = image * image - 2.0 * image * k2 + k2sq
    return RSFFit(f1, f2, e1, e2)


def rsf_fidelity_energy(phi, fit, lambda1, lambda2, dirac_spec=DiracSpec(), smooth=False):
    """``lambda1 sum e1 M1 + lambda2 sum e2 M2``."""
    m1 = heaviside_smooth(phi, dirac_spec) if smooth else heaviside_sharp(phi)
    return (lambda1 * float(np.sum(fit.e1 * m1))
            + lambda2 * float(np.sum(fit.e2 * (1.0 - m1))))


def rsf_energy(phi, fit, lambda1, lambda2, nu, dirac_spec=DiracSpec(), smooth=False):
    """RSF fidelity plus ``nu`` times the arc length of the zero level."""
    return (rsf_fidelity_energy(phi, fit, lambda1, lambda2, dirac_spec, smooth)
            + nu * length_energy(phi, dirac_spec))


def rsf_force(phi, fit, lambda1, lambda2, nu, dirac_spec=DiracSpec(), form="variational"):
    """``-delta(phi)(lambda1 e1 - lambda2 e2) + nu * arc-length force``."""
    out = -dirac(phi, dirac_spec) * (lambda1 * fit.e1 - lambda2 * fit.e2)
    if nu:
        out = out + nu * length_force(phi, dirac_spec, None, form)
    return out


# --- assembly for the time integrators -------------------------------------

class Problem:
    """A :class:`~mbeseg.model.ModelSpec` bound to an image.

    Precomputes the edge indicator for GAC models. ``fit(phi)`` returns the
    per-step fidelity data (an :class:`RSFFit` for RSF, ``None`` for GAC) that
    :func:`assemble_E1` and :func:`assemble_U` take as ``data``.
    """

    def __init__(self, spec, image):
        self.spec = spec
        self.image = check_field(image, "image")
        fid = spec.fidelity
        self.g = edge_indicator(self.image, fid.sigma_edge) if isinstance(fid, GAC) else None

    @property
    def shape(self):
        return self.image.shape

    def fit(self, phi):
        fid = self.spec.fidelity
        if isinstance(fid, RSF):
            return rsf_fit(phi, self.image, fid.sigma)
        return None

    def fidelity_energy(self, phi, data, smooth=True):
        fid = self.spec.fidelity
        d = self.spec.dirac
        if isinstance(fid, RSF):
            return rsf_energy(phi, data, fid.lambda1, fid.lambda2, fid.nu, d, smooth)
        return gac_energy(phi, self.g, fid.lam, fid.gamma, d, smooth)

    def fidelity_force(self, phi, data):
        fid = self.spec.fidelity
        d = self.spec.dirac
        form = self.spec.length_form
        if isinstance(fid, RSF):
            return rsf_force(phi, data, fid.lambda1, fid.lambda2, fid.nu, d, form)
        return gac_force(phi, self.g, fid.lam, fid.gamma, d, form)


def assemble_E1(phi, problem, data=None):
    """Lower-order energy for the SAV split, shifted by ``c0``.

    MBE: ``mu/4 sum(|grad phi|^2-1)^2``; DR1/DR2: ``mu`` times the whole
    regularizer. Fidelity terms use the smooth Heaviside so that
    :func:`assemble_U` is the exact derivative.
    """
    spec = problem.spec
    reg = spec.regularizer
    if data is None:
        data = problem.fit(phi)
    if reg.kind == "mbe":
        reg_part = mbe_nonequilibrium_energy(phi)
    else:
        reg_part = regularizer_energy(phi, reg)
    e1 = reg.mu * reg_part + problem.fidelity_energy(phi, data, smooth=True) + spec.c0
    if not e1 > 0:
        raise NonPositiveEnergyError(f"E1 = {e1} <= 0; raise the shift c0 (currently {spec.c0})")
    return e1


def assemble_U(phi, problem, data=None):
    """``U = dE1/dphi``; ``-(L phi + U)`` is the model's flow right-hand side."""
    spec = problem.spec
    reg = spec.regularizer
    if data is None:
        data = problem.fit(phi)
    if reg.kind == "mbe":
        reg_force = mbe_nonequilibrium_force(phi)
    else:
        reg_force = regularizer_force(phi, reg)
    return -reg.mu * reg_force - problem.fidelity_force(phi, data)


def flow_rhs(phi, problem, data=None):
    """Full right-hand side of the gradient flow, ``mu R'(phi) + F(phi)``."""
    spec = problem.spec
    if data is None:
        data = problem.fit(phi)
    return (spec.regularizer.mu * regularizer_force(phi, spec.regularizer)
            + problem.fidelity_force(phi, data))
