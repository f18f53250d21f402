"""Flux-form discretisation of ``A u = (x^alpha u_x)_x + mu x^(alpha-2) u``.

The operator is stored through the symmetric tridiagonal matrix
``S = -M A`` on the active nodes, where ``M`` is the lumped mass.  Weakly
degenerate problems (``alpha < 1``) eliminate both endpoints; strongly
degenerate ones keep node 0 with a zero flux on its left face and a
half-cell mass.  Node N always carries the homogeneous Dirichlet value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigurationError
from .grid import GridFunction, GridSpec, power_moment, trace_stencil
from .hardy import WD, Parameters


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    params: Parameters
    grid: GridSpec
    diag: np.ndarray          # diagonal of S = -M A
    off: np.ndarray           # off-diagonal of S
    mass: np.ndarray          # lumped mass on active nodes
    active: np.ndarray        # grid indices of the active nodes
    potential: np.ndarray     # mu * int_cell x^(alpha-2): the part of -diag(S) due to mu
    regularization: Optional[float] = None

    @property
    def size(self) -> int:
        return self.active.size

    @property
    def regime(self) -> str:
        return self.params.regime

    def stiffness_matvec(self, u: np.ndarray) -> np.ndarray:
        """``S @ u`` for ``u`` of shape ``(n,)`` or ``(n, m)``."""
        out = self.diag.reshape((-1,) + (1,) * (u.ndim - 1)) * u
        off = self.off.reshape((-1,) + (1,) * (u.ndim - 1))
        out[:-1] += off * u[1:]
        out[1:] += off * u[:-1]
        return out

    def stiffness_matrix(self) -> sp.csr_matrix:
        return sp.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csr")

    def mass_matvec(self, u: np.ndarray) -> np.ndarray:
        return self.mass.reshape((-1,) + (1,) * (u.ndim - 1)) * u

    def to_active(self, g: GridFunction) -> np.ndarray:
        if g.grid.N != self.grid.N:
            raise ConfigurationError(f"grid function on N={g.grid.N}, operator on N={self.grid.N}")
        return np.array(g.values[self.active])

    def to_grid(self, u: np.ndarray, boundary_value: float = 0.0) -> GridFunction:
        vals = np.zeros(self.grid.N + 1)
        vals[self.active] = u
        vals[-1] = boundary_value
        return GridFunction(self.grid, vals)

    def trace_weights(self) -> np.ndarray:
        """Row vector ``b`` with ``b @ u = u_x(1)`` for the quadratic stencil and ``u_N = 0``."""
        w2, w1, _ = trace_stencil(self.grid.h)
        b = np.zeros(self.size)
        b[-1] = w1
        b[-2] = w2
        return b

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Mass inner product on the active nodes."""
        return float(np.dot(self.mass * u, v))


def _face_weights(alpha: float, grid: GridSpec) -> np.ndarray:
    return grid.faces ** alpha


def assemble(p: Parameters, grid: GridSpec, regularization: Optional[float] = None,
             potential: str = "cell_average") -> DiscreteOperator:
    """Assemble the discrete operator for ``p`` on ``grid``.

    ``regularization=n`` replaces ``x^(alpha-2)`` by ``(x + 1/n)^(alpha-2)``.
    ``potential`` is ``"cell_average"`` (exact cell integral of the weight, the
    default) or ``"pointwise"`` (nodal sampling; strongly degenerate node 0
    still uses its cell integral because the weight is infinite there).
    """
    if not isinstance(p, Parameters):
        p = Parameters(*p)
    if potential not in ("cell_average", "pointwise"):
        raise ConfigurationError(f"unknown potential treatment {potential!r}")
    N, h, a = grid.N, grid.h, p.alpha
    first = 1 if p.regime == WD else 0
    active = np.arange(first, N)
    x = grid.nodes[active]

    w = _face_weights(a, grid)                 # faces 0..N-1 (face j sits right of node j)
    right = w[active]
    left = np.where(active > 0, w[np.maximum(active - 1, 0)], 0.0)

    mass = np.full(active.size, h)
    lo = np.maximum(x - 0.5 * h, 0.0)
    hi = x + 0.5 * h
    if first == 0:
        mass[0] = 0.5 * h
    if regularization is not None and not regularization > 0:
        raise ConfigurationError("regularization index must be positive")
    shift = 0.0 if regularization is None else 1.0 / float(regularization)
    cell_pot = power_moment(lo + shift, hi + shift, a - 2.0)
    if potential == "pointwise":
        with np.errstate(divide="ignore"):
            pointwise = (x + shift) ** (a - 2.0) * mass
        cell_pot = np.where(np.isfinite(pointwise), pointwise, cell_pot)
    pot = p.mu * cell_pot

    diag = (left + right) / h - pot
    off = -right[:-1] / h
    for arr in (diag, off, mass, active, pot):
        arr.setflags(write=False)
    return DiscreteOperator(p, grid, diag, off, mass, active, pot, regularization)


def apply(op: DiscreteOperator, u: GridFunction) -> GridFunction:
    """``A u`` in flux form, returned on the full grid (zero at eliminated nodes)."""
    ua = op.to_active(u)
    return op.to_grid(-op.stiffness_matvec(ua) / op.mass)


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Lowest eigenpairs of ``S phi = lambda M phi`` with ``phi^T M phi = 1``."""

    op: DiscreteOperator
    eigenvalues: np.ndarray
    vectors: np.ndarray     # active nodes x k

    @property
    def k(self) -> int:
        return self.eigenvalues.size

    def mode(self, j: int) -> GridFunction:
        """Mode ``j`` (0-based) as a grid function."""
        return self.op.to_grid(self.vectors[:, j])

    def functions(self) -> list[GridFunction]:
        return [self.mode(j) for j in range(self.k)]

    def coefficients(self, u: np.ndarray) -> np.ndarray:
        """Mass projections ``<u, phi_j>_M`` of active-node data (vector or columns)."""
        return self.vectors.T @ self.op.mass_matvec(u)

    def synthesize(self, coef: np.ndarray) -> np.ndarray:
        return self.vectors @ coef


def eigen(op: DiscreteOperator, k: int) -> EigenDecomposition:
    """Lowest ``k`` eigenpairs via symmetric reduction of the tridiagonal pencil."""
    if not 1 <= k <= op.size:
        raise ConfigurationError(f"k = {k} outside 1..{op.size}")
    s = 1.0 / np.sqrt(op.mass)
    d = op.diag * s * s
    e = op.off * s[:-1] * s[1:]
    lam, psi = eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
    phi = psi * s[:, None]
    # sign convention: positive value next to x = 1
    phi *= np.where(phi[-1] < 0, -1.0, 1.0)
    lam.setflags(write=False)
    phi.setflags(write=False)
    return EigenDecomposition(op, lam, phi)


def h1mu_norm_sq(u: GridFunction, op: DiscreteOperator) -> float:
    """Discrete ``int x^a u_x^2 - mu x^(a-2) u^2`` as ``u^T S u``."""
    ua = op.to_active(u)
    return float(np.dot(ua, op.stiffness_matvec(ua)))


def dual_norm_sq(f: GridFunction, op: DiscreteOperator, k: int,
                 decomposition: Optional[EigenDecomposition] = None) -> float:
    """Truncated ``H^{-1,mu}`` norm ``sum_{j<=k} <f, phi_j>_M^2 / lambda_j``."""
    dec = decomposition
    if dec is None or dec.op is not op or dec.k < k:
        if k > op.size:
            raise ConfigurationError(f"k = {k} exceeds the {op.size} available modes")
        dec = eigen(op, k)
    c = dec.coefficients(op.to_active(f))[:k]
    return float(np.sum(c * c / dec.eigenvalues[:k]))
