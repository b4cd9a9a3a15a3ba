"""Declarative model description: fidelity, regularizer, Dirac, solver."""

from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import ParameterError
from .levelset import DiracSpec


@dataclass(frozen=True)
class Regularizer:
    """``kind`` is ``"mbe"``, ``"dr1"`` or ``"dr2"``; ``alpha`` is MBE-only."""

    kind: str = "mbe"
    mu: float = 1.0
    alpha: float = 15.0

    def __post_init__(self):
        if self.kind not in ("mbe", "dr1", "dr2"):
            raise ParameterError(f"unknown regularizer {self.kind!r}")
        if not self.mu >= 0:
            raise ParameterError(f"mu must be >= 0, got {self.mu}")
        if self.kind == "mbe" and not self.alpha > 0:
            raise ParameterError(f"MBE needs alpha > 0, got {self.alpha}")


@dataclass(frozen=True)
class GAC:
    """Edge-weighted length (``lam``) plus balloon area term (``gamma``)."""

    lam: float = 1.0
    gamma: float = 1.0
    sigma_edge: float = 1.5

    def __post_init__(self):
        if not self.lam > 0:
            raise ParameterError(f"GAC lambda must be positive, got {self.lam}")
        if not self.sigma_edge > 0:
            raise ParameterError(f"sigma_edge must be positive, got {self.sigma_edge}")


@dataclass(frozen=True)
class RSF:
    """Region-scalable fitting with arc-length weight ``nu``."""

    lambda1: float = 0.67
    lambda2: float = 0.33
    sigma: float = 5.0
    nu: float = 10.0

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ParameterError(
                f"lambda1, lambda2 must be positive, got {self.lambda1}, {self.lambda2}")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if not self.nu >= 0:
            raise ParameterError(f"nu must be >= 0, got {self.nu}")


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to evolve a level set on a given image.

    ``length_form`` selects how curvature-type forces are discretised:
    ``"variational"`` (default) is the exact gradient of the discrete length
    energy, ``"curvature"`` is the literal ``delta(phi) div(n)`` product.
    """

    fidelity: Union[GAC, RSF] = field(default_factory=RSF)
    regularizer: Regularizer = field(default_factory=Regularizer)
    dirac: DiracSpec = field(default_factory=DiracSpec)
    solver: str = "sav"
    tau: float = 0.01
    iter_max: int = 1000
    tol: Optional[float] = None
    c0: float = 1.0
    length_form: str = "variational"

    def __post_init__(self):
        if self.solver not in ("sav", "fdm"):
            raise ParameterError(f"solver must be 'sav' or 'fdm', got {self.solver!r}")
        if not self.tau > 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")
        if self.iter_max < 0:
            raise ParameterError(f"iter_max must be >= 0, got {self.iter_max}")
        if self.tol is not None and not self.tol > 0:
            raise ParameterError(f"tol must be positive when set, got {self.tol}")
        if self.length_form not in ("variational", "curvature"):
            raise ParameterError(f"unknown length_form {self.length_form!r}")

    @property
    def mbe(self):
        return self.regularizer.kind == "mbe"

    @property
    def linear_coefficient(self):
        """Coefficient of the biharmonic in L = mu alpha Delta^2 (0 for DR)."""
        r = self.regularizer
        return r.mu * r.alpha if self.mbe else 0.0
