"""Time integration of the level-set gradient flows.

Two steppers share one spectral toolkit:

* :func:`sav_step`, the first-order scalar-auxiliary-variable scheme. The
  energy is split as ``1/2 (phi, L phi) + E1(phi)`` with ``L = mu alpha
  Lap^2``; each step needs two solves with ``A = I + tau L``, both diagonal in
  Fourier space. The modified energy ``1/2 (phi, L phi) + r^2`` never grows.
* :func:`fdm_step`, the semi-implicit scheme that treats
  ``mu (3/4 alpha Lap^2 + Lap)`` implicitly and the rest explicitly.

For DR1/DR2 regularizers there is no fourth-order part: ``L = 0`` and both
steppers degrade to explicit updates (SAV keeps its auxiliary variable).
"""

from dataclasses import dataclass, field
import math
import time

import numpy as np

from .energy import Problem, assemble_E1, assemble_U, regularizer_force
from .errors import DivergenceError, ParameterError, SchemeInstabilityError
from .field import check_field, divergence_central, gradient_central, gradient_magnitude, laplacian
from .levelset import InitSpec, extract_zero_contour, init_level_set

#: abort when any |phi| exceeds this
BLOWUP = 1e6


# --- spectral symbols -------------------------------------------------------

def laplacian_symbol(shape):
    """Fourier symbol of the 5-point Laplacian on the rfft2 frequency grid."""
    rows, cols = shape
    z_y = 2.0 * np.pi * np.arange(rows) / rows
    z_x = 2.0 * np.pi * np.arange(cols // 2 + 1) / cols
    return (2.0 * np.cos(z_y) - 2.0)[:, None] + (2.0 * np.cos(z_x) - 2.0)[None, :]


@dataclass(frozen=True)
class SpectralSymbols:
    shape: tuple
    tau: float
    mu: float
    alpha: float
    lap: np.ndarray
    biharm: np.ndarray
    a_inv: np.ndarray
    fdm_lhs_inv: np.ndarray


def build_symbols(shape, tau, mu, alpha, scheme="sav"):
    """Precompute the Fourier multipliers for a ``shape = (N, M)`` grid.

    ``a_inv = 1/(1 + tau mu alpha lam^2)`` inverts the SAV operator and
    ``fdm_lhs_inv = 1/(1 + tau mu (3/4 alpha lam^2 + lam))`` the semi-implicit
    left-hand side, where ``lam`` is the Laplacian symbol in [-8, 0].

    For ``scheme="fdm"`` the left-hand symbol must stay positive, which
    holds on every grid when ``tau mu < 3 alpha``; it is also checked on the
    actual frequencies.
    """
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    if mu < 0 or alpha < 0:
        raise ParameterError(f"mu and alpha must be >= 0, got mu={mu}, alpha={alpha}")
    if scheme not in ("sav", "fdm"):
        raise ParameterError(f"scheme must be 'sav' or 'fdm', got {scheme!r}")
    lam = laplacian_symbol(shape)
    lam2 = lam * lam
    a_inv = 1.0 / (1.0 + tau * mu * alpha * lam2)
    fdm_lhs = 1.0 + tau * mu * (0.75 * alpha * lam2 + lam)
    if scheme == "fdm":
        worst = float(fdm_lhs.min())
        if worst <= 1e-12:
            raise SchemeInstabilityError(
                f"semi-implicit symbol reaches {worst:.3g} <= 0 for tau={tau}, mu={mu}, "
                f"alpha={alpha}; need tau*mu < 3*alpha")
    with np.errstate(divide="ignore"):
        fdm_lhs_inv = np.where(fdm_lhs > 1e-12, 1.0 / fdm_lhs, np.inf)
    for arr in (lam, lam2, a_inv, fdm_lhs_inv):
        arr.flags.writeable = False
    return SpectralSymbols(tuple(shape), float(tau), float(mu), float(alpha),
                           lam, lam2, a_inv, fdm_lhs_inv)


def symbols_for(spec, shape):
    """Symbols for a :class:`ModelSpec`; DR regularizers get no implicit part."""
    reg = spec.regularizer
    if reg.kind == "mbe":
        return build_symbols(shape, spec.tau, reg.mu, reg.alpha, spec.solver)
    return build_symbols(shape, spec.tau, 0.0, 0.0, spec.solver)


def apply_symbol(f, symbol):
    """Multiply ``f`` by a real Fourier multiplier given on the rfft2 grid."""
    f = check_field(f)
    return np.fft.irfft2(np.fft.rfft2(f) * symbol, s=f.shape)


def apply_A_inverse(f, symbols):
    """Solve ``(I + tau mu alpha Lap^2) x = f``."""
    return apply_symbol(f, symbols.a_inv)


# --- state and energy -------------------------------------------------------

@dataclass
class LevelSetState:
    phi: np.ndarray
    r: float
    iter: int = 0


def _dot(a, b):
    return float(np.sum(a * b))


def quadratic_energy(phi, linear_coefficient):
    """``1/2 (phi, L phi)`` with ``L = c Lap^2``, evaluated as ``c/2 sum (Lap phi)^2``."""
    if linear_coefficient == 0:
        return 0.0
    lap = laplacian(phi)
    return 0.5 * linear_coefficient * _dot(lap, lap)


def modified_energy(state, spec):
    """SAV Lyapunov functional ``1/2 (phi, L phi) + r^2``."""
    return quadratic_energy(state.phi, spec.linear_coefficient) + state.r * state.r


def initial_state(phi, problem):
    """State with ``r = sqrt(E1(phi))``."""
    phi = check_field(phi, "phi").copy()
    return LevelSetState(phi, math.sqrt(assemble_E1(phi, problem)), 0)


def _guard(phi, iteration):
    if not np.all(np.isfinite(phi)):
        raise DivergenceError(f"non-finite level set at iteration {iteration}", iteration)
    peak = float(np.max(np.abs(phi)))
    if peak > BLOWUP:
        raise DivergenceError(f"|phi| = {peak:.3g} exceeds {BLOWUP:g} at iteration {iteration}",
                              iteration)


# --- steppers -----------------------------------------------------------------

def sav_step(state, problem, symbols, prep=None):
    """One first-order SAV step.

    ``prep`` optionally carries ``(data, E1)`` already evaluated at
    ``state.phi`` so the driver does not recompute them.
    """
    phi = state.phi
    tau = symbols.tau
    data, e1 = prep if prep is not None else _prepare(phi, problem)
    sqrt_e1 = math.sqrt(e1)
    b = assemble_U(phi, problem, data) / sqrt_e1
    c = phi - tau * state.r * b + 0.5 * tau * _dot(b, phi) * b
    ainv_c = apply_A_inverse(c, symbols)
    ainv_b = apply_A_inverse(b, symbols)
    d = _dot(b, ainv_c) / (1.0 + 0.5 * tau * _dot(b, ainv_b))
    phi_new = ainv_c - 0.5 * tau * d * ainv_b
    r_new = state.r + 0.5 * _dot(b, phi_new - phi)
    _guard(phi_new, state.iter + 1)
    return LevelSetState(phi_new, r_new, state.iter + 1)


def fdm_step(state, problem, symbols, prep=None):
    """One semi-implicit step; ``r`` is carried through unchanged."""
    phi = state.phi
    tau = symbols.tau
    spec = problem.spec
    reg = spec.regularizer
    data = prep[0] if prep is not None else problem.fit(phi)
    seg = problem.fidelity_force(phi, data)
    if reg.kind == "mbe":
        u, v = gradient_central(phi)
        s2 = u * u + v * v
        explicit = reg.mu * (-0.25 * reg.alpha * laplacian(laplacian(phi))
                             + divergence_central((s2 * u, s2 * v)))
        phi_new = apply_symbol(phi + tau * (explicit + seg), symbols.fdm_lhs_inv)
    else:
        phi_new = phi + tau * (reg.mu * regularizer_force(phi, reg) + seg)
    _guard(phi_new, state.iter + 1)
    return LevelSetState(phi_new, state.r, state.iter + 1)


def _prepare(phi, problem):
    data = problem.fit(phi)
    return data, assemble_E1(phi, problem, data)


# --- trace --------------------------------------------------------------------

TRACE_HEADER = ("iter", "E_mod", "E1", "r", "grad_max", "grad_mean")


@dataclass
class EnergyTrace:
    """Per-iteration record. ``E_mod`` is the SAV modified energy for SAV runs
    and the unmodified energy ``1/2 (phi, L phi) + E1`` for FDM runs."""

    rows: list = field(default_factory=list)

    def append(self, iteration, e_mod, e1, r, grad_max, grad_mean):
        self.rows.append((int(iteration), float(e_mod), float(e1), float(r),
                          float(grad_max), float(grad_mean)))

    def column(self, name):
        k = TRACE_HEADER.index(name)
        return np.array([row[k] for row in self.rows])

    def __len__(self):
        return len(self.rows)

    def is_monotone(self, rel_slack=1e-10):
        e = self.column("E_mod")
        if len(e) < 2:
            return True
        return bool(np.all(e[1:] - e[:-1] <= rel_slack * (1.0 + np.abs(e[:-1]))))

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(TRACE_HEADER) + "\n")
            for row in self.rows:
                fh.write(str(row[0]) + "," + ",".join(f"{x:.17g}" for x in row[1:]) + "\n")

    @classmethod
    def from_csv(cls, path):
        trace = cls()
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != TRACE_HEADER:
                raise ValueError(f"{path}: unexpected trace header {header}")
            for line in fh:
                if line.strip():
                    it, *rest = line.strip().split(",")
                    trace.append(int(it), *map(float, rest))
        return trace


def _record(trace, state, e1, spec):
    grad = gradient_magnitude(state.phi)
    if spec.solver == "sav":
        e_mod = modified_energy(state, spec)
        r = state.r
    else:
        e_mod = quadratic_energy(state.phi, spec.linear_coefficient) + e1
        r = math.sqrt(e1)
    trace.append(state.iter, e_mod, e1, r, grad.max(), grad.mean())


# --- driver -------------------------------------------------------------------

@dataclass
class SegmentationResult:
    phi: np.ndarray
    mask: np.ndarray
    contours: list
    gradmap: np.ndarray
    iterations: int
    converged: bool
    wall_time: float


def run(spec, image, init):
    """Evolve from ``init`` (an :class:`InitSpec` or an initial array).

    Runs ``spec.iter_max`` steps, or stops early once
    ``max|phi_new - phi| / tau < spec.tol`` when a tolerance is set.
    A :class:`DivergenceError` carries the partial trace in ``.trace``.
    """
    t0 = time.perf_counter()
    problem = Problem(spec, image)
    if isinstance(init, InitSpec):
        phi0 = init_level_set(problem.shape, init)
    else:
        phi0 = check_field(init, "init")
        if phi0.shape != problem.shape:
            raise ParameterError(f"initial level set {phi0.shape} does not match image {problem.shape}")
    symbols = symbols_for(spec, problem.shape)
    step = sav_step if spec.solver == "sav" else fdm_step

    prep = _prepare(phi0, problem)
    state = LevelSetState(phi0.copy(), math.sqrt(prep[1]), 0)
    trace = EnergyTrace()
    _record(trace, state, prep[1], spec)
    converged = False
    try:
        for _ in range(spec.iter_max):
            new = step(state, problem, symbols, prep)
            prep = _prepare(new.phi, problem)
            change = float(np.max(np.abs(new.phi - state.phi))) / spec.tau
            state = new
            _record(trace, state, prep[1], spec)
            if spec.tol is not None and change < spec.tol:
                converged = True
                break
    except DivergenceError as exc:
        exc.trace = trace
        raise
    phi = state.phi
    result = SegmentationResult(
        phi=phi,
        mask=phi >= 0,
        contours=extract_zero_contour(phi),
        gradmap=gradient_magnitude(phi),
        iterations=state.iter,
        converged=converged,
        wall_time=time.perf_counter() - t0,
    )
    return result, trace
