"""Uniform node-centred grids on [0, 1] and weighted quadrature.

All weighted integrals integrate the weight ``x**beta`` exactly on each cell
against a piecewise-linear reconstruction of the integrand, so the singular
weights ``x**(alpha - 2)`` never have to be sampled at ``x = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, SingularIntegrandError

MIN_CELLS = 4


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``N`` cells, nodes ``j*h`` and faces ``(j + 1/2)*h``."""

    N: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    faces: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < MIN_CELLS:
            raise ConfigurationError(f"grid needs an integer N >= {MIN_CELLS}, got {self.N!r}")
        N = int(self.N)
        nodes = np.arange(N + 1, dtype=float) / N
        nodes[-1] = 1.0
        faces = (np.arange(N, dtype=float) + 0.5) / N
        nodes.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "h", 1.0 / N)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "faces", faces)

    def sample(self, f: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return GridFunction(self, np.asarray(f(self.nodes), dtype=float) * np.ones(self.N + 1))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.N + 1))


@dataclass(frozen=True)
class GridFunction:
    """Nodal values ``values[j] = g(x_j)`` for ``j = 0..N``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.N + 1,):
            raise ConfigurationError(
                f"grid function needs {self.grid.N + 1} values, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _values(other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _values(other))

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


def _values(g):
    return g.values if isinstance(g, GridFunction) else np.asarray(g, dtype=float)


def build_grid(N: int) -> GridSpec:
    """Return the uniform grid with ``N`` cells (``N >= 4``)."""
    return GridSpec(N)


def power_moment(a, b, p: float) -> np.ndarray:
    """Exact ``int_a^b x**p dx`` for ``0 <= a < b``, vectorised over cells.

    For ``a > 0`` the difference ``b**(p+1) - a**(p+1)`` is formed through
    ``expm1``/``log1p`` so thin cells far from zero keep full relative
    accuracy.  Cells starting at ``a = 0`` require ``p > -1``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    q = p + 1.0
    out = np.empty(a.shape)
    pos = a > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log1p((b[pos] - a[pos]) / a[pos])
        if q == 0.0:
            out[pos] = ratio
        else:
            out[pos] = a[pos] ** q * np.expm1(q * ratio) / q
        zero = ~pos
        if np.any(zero):
            out[zero] = b[zero] ** q / q if q > 0 else np.inf
    return out


def _cell_coefficients(g: GridFunction):
    # g = c0 + c1*x on cell [x_j, x_{j+1}]
    x = g.grid.nodes
    v = g.values
    c1 = np.diff(v) / g.grid.h
    c0 = v[:-1] - c1 * x[:-1]
    return c0, c1


def _guarded_moment(coef, a, b, p: float, what: str):
    """Sum of ``coef * int x**p`` skipping cells where ``coef == 0``."""
    active = coef != 0.0
    if not np.any(active):
        return 0.0
    if p <= -1.0 and active[0] and a[0] == 0.0:
        raise SingularIntegrandError(
            f"{what}: integrand behaves like x**{p:g} on the first cell, not integrable at 0"
        )
    return float(np.sum(coef[active] * power_moment(a[active], b[active], p)))


def weighted_integral(g: GridFunction, beta: float) -> float:
    """Approximate ``int_0^1 x**beta g(x) dx``.

    ``g`` is reconstructed piecewise-linearly and each cell moment of
    ``x**beta`` is exact, so the result is exact for piecewise-linear ``g``.
    Raises :class:`SingularIntegrandError` when the reconstruction is not
    integrable at zero (``beta <= -1`` with ``g(0) != 0``, or
    ``beta <= -2`` with a nonzero first-cell slope).
    """
    x = g.grid.nodes
    a, b = x[:-1], x[1:]
    c0, c1 = _cell_coefficients(g)
    return (_guarded_moment(c0, a, b, beta, "weighted_integral")
            + _guarded_moment(c1, a, b, beta + 1.0, "weighted_integral"))


def weighted_square_integral(g: GridFunction, beta: float) -> float:
    """Exact ``int_0^1 x**beta g_h(x)**2 dx`` for the piecewise-linear interpolant ``g_h``.

    Needs ``beta > -1`` when ``g(0) != 0`` and ``beta > -3`` otherwise.
    """
    x = g.grid.nodes
    a, b = x[:-1], x[1:]
    c0, c1 = _cell_coefficients(g)
    return (_guarded_moment(c0 * c0, a, b, beta, "weighted_square_integral")
            + _guarded_moment(2.0 * c0 * c1, a, b, beta + 1.0, "weighted_square_integral")
            + _guarded_moment(c1 * c1, a, b, beta + 2.0, "weighted_square_integral"))


def face_derivative(g: GridFunction) -> np.ndarray:
    """Difference quotients ``(g[j+1] - g[j]) / h`` at the faces."""
    return np.diff(g.values) / g.grid.h


def face_weighted_integral(d: np.ndarray, grid: GridSpec, beta: float) -> float:
    """``int_0^1 x**beta d(x)**2 dx`` for ``d`` constant on each cell (e.g. a face derivative)."""
    d = np.asarray(d, dtype=float)
    if d.shape != (grid.N,):
        raise ConfigurationError(f"face array needs {grid.N} values, got shape {d.shape}")
    x = grid.nodes
    return _guarded_moment(d * d, x[:-1], x[1:], beta, "face_weighted_integral")


def trace_stencil(h: float) -> tuple[float, float, float]:
    """Weights on ``(g[N-2], g[N-1], g[N])`` of the one-sided quadratic derivative at ``x = 1``."""
    return 1.0 / (2.0 * h), -2.0 / h, 3.0 / (2.0 * h)


def boundary_trace_derivative(g: GridFunction) -> float:
    """Second-order one-sided approximation of ``g'(1)``."""
    if g.grid.N < MIN_CELLS:
        raise ConfigurationError("grid too coarse for the boundary trace stencil")
    w2, w1, w0 = trace_stencil(g.grid.h)
    v = g.values
    return float(w2 * v[-3] + w1 * v[-2] + w0 * v[-1])
