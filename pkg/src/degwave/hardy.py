"""Weighted Hardy-type functionals, the constants attached to them, and checks.

Integrals are evaluated exactly on the piecewise-linear interpolant of the
grid function.  That interpolant belongs to the weighted energy space, so
every inequality here holds for it up to rounding; the ``10*h**2`` tolerance
only matters when comparing against closed forms of the sampled profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundaryConditionError,
    EquivalenceNotApplicableError,
    ParameterError,
    TransformDomainError,
    UnsupportedRegimeError,
)
from .grid import (
    GridFunction,
    face_derivative,
    face_weighted_integral,
    weighted_square_integral,
)

WD = "WD"
SD = "SD"


def mu_critical(alpha: float) -> float:
    """Critical potential strength ``(1 - alpha)**2 / 4``."""
    if not 0.0 <= alpha < 2.0:
        raise ParameterError(f"alpha must lie in [0, 2), got {alpha}")
    return (1.0 - alpha) ** 2 / 4.0


@dataclass(frozen=True)
class Parameters:
    """Admissible pair ``alpha in [0,2)\\{1}``, ``mu <= mu_critical(alpha)``."""

    alpha: float
    mu: float

    def __post_init__(self):
        alpha, mu = float(self.alpha), float(self.mu)
        if alpha == 1.0:
            raise UnsupportedRegimeError("alpha = 1 is excluded (no Hardy control of u/x^(1/2))")
        crit = mu_critical(alpha)
        if not np.isfinite(mu) or mu > crit * (1.0 + 1e-14) + 1e-300:
            raise ParameterError(f"mu = {mu} exceeds mu_critical({alpha}) = {crit}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "mu", min(mu, crit))

    @classmethod
    def critical(cls, alpha: float) -> "Parameters":
        return cls(alpha, mu_critical(alpha))

    @property
    def regime(self) -> str:
        return WD if self.alpha < 1.0 else SD

    @property
    def is_critical(self) -> bool:
        return self.mu == mu_critical(self.alpha)


# ---------------------------------------------------------------------------
# constants


def poincare_constant(alpha: float) -> float:
    """``C_alpha = 16 / (2 - alpha)**2``."""
    return 16.0 / (2.0 - alpha) ** 2


def sharp_poincare_constant(alpha: float) -> float:
    """``min(4/((1-alpha)(3-alpha)), C_alpha)`` for ``alpha < 1``; ``C_alpha`` otherwise."""
    if alpha < 1.0:
        return min(4.0 / ((1.0 - alpha) * (3.0 - alpha)), poincare_constant(alpha))
    return poincare_constant(alpha)


def x2_constant(alpha: float) -> float:
    """Constant bounding ``int x^2 u_x^2`` by the critical Hardy functional.

    1 when ``alpha < 1``, ``1 + 4(1-alpha)(alpha-3)/(2-alpha)**2`` otherwise.
    """
    if alpha < 1.0:
        return 1.0
    return 1.0 + 4.0 * (1.0 - alpha) * (alpha - 3.0) / (2.0 - alpha) ** 2


def l2_coefficient(alpha: float) -> float:
    """Coefficient ``(1-alpha)(alpha-3)/4`` of ``int u^2`` in the x^2-weighted inequality."""
    return (1.0 - alpha) * (alpha - 3.0) / 4.0


def equivalence_constants(alpha: float, mu: float) -> tuple[float, float]:
    crit = mu_critical(alpha)
    return 1.0 - max(0.0, mu) / crit, 1.0 - min(0.0, mu) / crit


def observability_time(alpha: float) -> float:
    """``T_alpha = 4 / (2 - alpha)``."""
    return 4.0 / (2.0 - alpha)


def observability_constant(alpha: float, T: float) -> float:
    """``(2 - alpha) T - 4``."""
    return (2.0 - alpha) * T - 4.0


def direct_constant(alpha: float, T: float) -> float:
    """``2T + 4`` (alpha < 1) or ``2T + 4 C'_alpha``."""
    return 2.0 * T + 4.0 * x2_constant(alpha)


def poincare_optimal_lambda(alpha: float) -> float:
    return (2.0 - alpha) / 4.0


def poincare_square_gap(lam, alpha: float):
    """``lam**2 - lam(1 - alpha/2) + (2-alpha)**2/16``; nonnegative, zero only at the optimum."""
    lam = np.asarray(lam, dtype=float)
    return lam * lam - lam * (1.0 - alpha / 2.0) + (2.0 - alpha) ** 2 / 16.0


# ---------------------------------------------------------------------------
# functionals


def tol_quadrature(u: GridFunction) -> float:
    return 10.0 * u.grid.h ** 2


def check_boundary(u: GridFunction, regime: str) -> None:
    scale = max(1.0, float(np.max(np.abs(u.values))))
    if abs(u.values[-1]) > 1e-12 * scale:
        raise BoundaryConditionError(f"u(1) = {u.values[-1]:g}, expected 0")
    if regime == WD and abs(u.values[0]) > 1e-12 * scale:
        raise BoundaryConditionError(f"weakly degenerate input needs u(0) = 0, got {u.values[0]:g}")


def kinetic_integral(u: GridFunction, alpha: float) -> float:
    """``int_0^1 x^alpha u_x^2``."""
    return face_weighted_integral(face_derivative(u), u.grid, alpha)


def potential_integral(u: GridFunction, alpha: float) -> float:
    """``int_0^1 x^(alpha-2) u^2``."""
    return weighted_square_integral(u, alpha - 2.0)


def l2_integral(u: GridFunction) -> float:
    return weighted_square_integral(u, 0.0)


def hardy_functional(u: GridFunction, p: Parameters) -> float:
    """Squared ``H^{1,mu}_{alpha,0}`` norm ``int x^a u_x^2 - mu x^(a-2) u^2``."""
    check_boundary(u, p.regime)
    if not np.any(u.values):
        return 0.0
    value = kinetic_integral(u, p.alpha)
    if p.mu != 0.0:
        value -= p.mu * potential_integral(u, p.alpha)
    return value


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of checking ``lhs <= rhs``."""

    name: str
    lhs: float
    rhs: float
    constant_used: float
    constant_name: str
    tol: float
    strict: bool = False
    details: dict = field(default_factory=dict, compare=False)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def satisfied(self) -> bool:
        if self.strict:
            return self.slack > 0.0
        return self.slack >= -self.tol


@dataclass(frozen=True)
class SandwichReport:
    """Two-sided bound ``lower.lhs <= value <= upper.rhs``."""

    lower: InequalityReport
    upper: InequalityReport

    @property
    def satisfied(self) -> bool:
        return self.lower.satisfied and self.upper.satisfied

    @property
    def slack(self) -> float:
        return min(self.lower.slack, self.upper.slack)


def _critical(alpha: float) -> Parameters:
    return Parameters.critical(alpha)


def check_generalized_hardy(u: GridFunction, alpha: float, strict: bool = False) -> InequalityReport:
    """``mu(alpha) int x^(a-2) u^2 <= int x^a u_x^2``."""
    p = _critical(alpha)
    check_boundary(u, p.regime)
    lhs = p.mu * potential_integral(u, alpha) if np.any(u.values) else 0.0
    rhs = kinetic_integral(u, alpha)
    return InequalityReport("hardy", lhs, rhs, p.mu, "mu(alpha)", tol_quadrature(u), strict)


def check_poincare(u: GridFunction, alpha: float, strict: bool = False) -> InequalityReport:
    """``int u^2 <= C_alpha * H(u)`` with the critical Hardy functional ``H``."""
    p = _critical(alpha)
    c = poincare_constant(alpha)
    h_val = hardy_functional(u, p)
    lhs = l2_integral(u)
    sharp = sharp_poincare_constant(alpha)
    return InequalityReport("poincare", lhs, c * h_val, c, "C_alpha", tol_quadrature(u), strict,
                            details={"sharp_constant": sharp, "sharp_rhs": sharp * h_val,
                                     "hardy_functional": h_val})


def check_x2_bound(u: GridFunction, alpha: float, strict: bool = False) -> InequalityReport:
    """``int x^2 u_x^2 <= c * H(u)``, ``c = 1`` (WD) or ``C'_alpha`` (SD)."""
    p = _critical(alpha)
    c = x2_constant(alpha)
    lhs = face_weighted_integral(face_derivative(u), u.grid, 2.0)
    name = "1" if alpha < 1.0 else "C'_alpha"
    return InequalityReport("x2_bound", lhs, c * hardy_functional(u, p), c, name,
                            tol_quadrature(u), strict)


def check_theorem_1_1(u: GridFunction, alpha: float, strict: bool = False) -> InequalityReport:
    """``int x^2 u_x^2 <= H(u) + (1-a)(a-3)/4 int u^2``."""
    p = _critical(alpha)
    c = l2_coefficient(alpha)
    lhs = face_weighted_integral(face_derivative(u), u.grid, 2.0)
    rhs = hardy_functional(u, p) + c * l2_integral(u)
    return InequalityReport("weighted_x2", lhs, rhs, c, "(1-alpha)(alpha-3)/4",
                            tol_quadrature(u), strict)


def norm_equivalence_check(u: GridFunction, p: Parameters) -> SandwichReport:
    """``C1 int x^a u_x^2 <= H_mu(u) <= C2 int x^a u_x^2`` for subcritical ``mu``."""
    if p.is_critical:
        raise EquivalenceNotApplicableError(
            "norm equivalence fails at mu = mu(alpha): the critical space is strictly larger"
        )
    c1, c2 = equivalence_constants(p.alpha, p.mu)
    h_val = hardy_functional(u, p)
    k_val = kinetic_integral(u, p.alpha)
    tol = tol_quadrature(u)
    lower = InequalityReport("equivalence_lower", c1 * k_val, h_val, c1, "C1_alpha_mu", tol)
    upper = InequalityReport("equivalence_upper", h_val, c2 * k_val, c2, "C2_alpha_mu", tol)
    return SandwichReport(lower, upper)


@dataclass(frozen=True)
class TransformResiduals:
    residual_1: float
    residual_2: float
    hardy_side: float
    transformed_side: float


def appendix_transform_identity(u: GridFunction, alpha: float) -> TransformResiduals:
    """Residuals of the identities behind ``U = x^((alpha-1)/2) u``.

    ``residual_1 = |H(u) - int x U_x^2|`` and
    ``residual_2 = |int x^2 u_x^2 - int x^(3-a) U_x^2 - (1-a)(a-3)/4 int x^(1-a) U^2|``.
    ``U`` is undefined at ``x = 0``; its limit there is 0 for every
    admissible bounded ``u`` (``u(0) = 0`` when ``alpha < 1``, and the
    prefactor vanishes when ``alpha > 1``), which fixes the first cell.
    """
    p = _critical(alpha)
    check_boundary(u, p.regime)
    x = u.grid.nodes
    U = np.zeros_like(x)
    U[1:] = x[1:] ** (0.5 * (alpha - 1.0)) * u.values[1:]
    if not np.all(np.isfinite(U)):
        raise TransformDomainError("U = x^((alpha-1)/2) u is not finite at interior nodes")
    Ug = GridFunction(u.grid, U)
    dU = face_derivative(Ug)

    hardy_side = hardy_functional(u, p)
    transformed = face_weighted_integral(dU, u.grid, 1.0)
    residual_1 = abs(hardy_side - transformed)

    lhs2 = face_weighted_integral(face_derivative(u), u.grid, 2.0)
    rhs2 = (face_weighted_integral(dU, u.grid, 3.0 - alpha)
            + l2_coefficient(alpha) * weighted_square_integral(Ug, 1.0 - alpha))
    return TransformResiduals(residual_1, abs(lhs2 - rhs2), hardy_side, transformed)
