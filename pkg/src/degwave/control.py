"""HUM boundary null control: backward traces, the transposed forward solve, the Gramian and CG.

The discrete forward problem with boundary control is *defined* as the
algebraic adjoint of the backward trace map.  With ``b`` the trace row
(``b @ w = w_x(1)``) and ``g = -M^{-1} b^T``, a controlled step is a velocity
half-kick ``v += dt/2 f_n g``, a free implicit-midpoint step, and a second
half-kick with ``f_{n+1}``.  Because the free step preserves
``omega(z, w) = <v, w>_M - <y, w_t>_M``, this makes

    omega(z(T), w(T)) - omega(z(0), w(0)) = -sum_n trap_n f_n w_x(t_n, 1)

hold to rounding for every final datum ``w(T)``, which is the discrete
duality identity.  Final data are expressed in energy-normalised modal
coordinates ``w0 = sum a_k phi_k / sqrt(lambda_k)``, ``w1 = sum b_k phi_k`` so
that ``E(w) = |(a, b)|^2 / 2``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import (
    MidpointStepper,
    TraceSeries,
    WaveState,
    energy_of,
    filtered_random_data,
    integrate,
    mode_data,
    resolve_steps,
    trapezoid,
)
from .errors import ConfigurationError, NotControllableError
from .grid import GridFunction, build_grid
from .hardy import Parameters, check_boundary, observability_constant, observability_time
from .operator import DiscreteOperator, EigenDecomposition, assemble, eigen

CG_TOL = 1e-8
CG_MAX_ITER = 500
GRAMIAN_MARGIN = 0.05


@dataclass(frozen=True)
class FinalData:
    """Final data ``(w(T), w_t(T))`` of the backward adjoint problem."""

    w0: GridFunction
    w1: GridFunction

    def validate(self, op: DiscreteOperator) -> None:
        check_boundary(self.w0, op.regime)


@dataclass(frozen=True)
class ControlSignal:
    """Boundary values ``f(t_m)``, ``t_m = m dt``, imposed at ``x = 1``."""

    dt: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise ConfigurationError("a control needs at least two samples")
        if not np.all(np.isfinite(s)):
            raise ConfigurationError("control samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def zeros(cls, T: float, dt: float) -> "ControlSignal":
        steps, dt = resolve_steps(T, dt)
        return cls(dt, np.zeros(steps + 1))

    @property
    def steps(self) -> int:
        return self.samples.size - 1

    @property
    def T(self) -> float:
        return self.dt * self.steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.samples.size)

    def l2_norm(self) -> float:
        return math.sqrt(float(trapezoid(self.samples ** 2, self.dt)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "f"])
            for t, s in zip(self.times, self.samples):
                w.writerow([f"{t:.12g}", f"{s:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "ControlSignal":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["t", "f"]:
            raise ConfigurationError(f"{path}: expected header 't,f'")
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
        if data.shape[0] < 2:
            raise ConfigurationError(f"{path}: need at least two samples")
        dts = np.diff(data[:, 0])
        dt = float(np.mean(dts))
        if np.max(np.abs(dts - dt)) > 1e-9 * max(dt, 1.0):
            raise ConfigurationError(f"{path}: samples are not uniformly spaced")
        return cls(dt, data[:, 1])


@dataclass(frozen=True)
class HUMResult:
    control: ControlSignal
    cg_iterations: int
    cg_residual: float
    final_state_energy_ratio: float
    gramian_min_eig_estimate: float
    below_threshold: bool
    T: float
    K: int
    coefficients: np.ndarray = field(repr=False, default=None)
    ell_unfiltered_fraction: float = 0.0
    filtered_final_ratio: float = 0.0      # share of the ratio carried by the lowest K modes
    final_state: Optional[WaveState] = field(default=None, repr=False)

    SUMMARY_FIELDS = ("T", "K", "cg_iterations", "cg_residual", "final_state_energy_ratio",
                      "gramian_min_eig_estimate", "control_l2", "ell_unfiltered_fraction",
                      "filtered_final_ratio", "below_threshold")

    def summary_row(self) -> dict:
        return {
            "T": f"{self.T:.12g}",
            "K": str(self.K),
            "cg_iterations": str(self.cg_iterations),
            "cg_residual": f"{self.cg_residual:.6e}",
            "final_state_energy_ratio": f"{self.final_state_energy_ratio:.6e}",
            "gramian_min_eig_estimate": f"{self.gramian_min_eig_estimate:.6e}",
            "control_l2": f"{self.control.l2_norm():.6e}",
            "ell_unfiltered_fraction": f"{self.ell_unfiltered_fraction:.6e}",
            "filtered_final_ratio": f"{self.filtered_final_ratio:.6e}",
            "below_threshold": str(self.below_threshold).lower(),
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.SUMMARY_FIELDS))
            w.writeheader()
            w.writerow(self.summary_row())


# ---------------------------------------------------------------------------
# raw solvers on active-node arrays (vectors or column batches)


def _control_vector(op: DiscreteOperator) -> np.ndarray:
    return -op.trace_weights() / op.mass


def _backward_traces(op, w0, w1, dt, steps, stepper=None):
    """Traces ``w_x(t_m, 1)``, ``m = 0..steps``, of the free solution with data at ``T``."""
    _, _, traces, _, _, _ = integrate(op, w0, w1, -dt, steps, stepper=stepper)
    return traces[::-1].copy()


def _forward_controlled(op, y0, y1, f, dt, stepper=None):
    """Controlled forward solve; ``f`` has shape ``(steps+1,)`` or ``(steps+1, m)``."""
    stepper = stepper or MidpointStepper(op, dt)
    g = _control_vector(op)
    g = g.reshape((-1,) + (1,) * (np.ndim(f) - 1))
    u = np.array(y0, dtype=float)
    v = np.array(y1, dtype=float)
    half = 0.5 * dt
    for n in range(f.shape[0] - 1):
        v = v + half * f[n] * g
        u, v = stepper.step(u, v, dt)
        v = v + half * f[n + 1] * g
    return u, v


def _pairing(op, y, yt, w0, w1):
    """``omega((y, y_t), (w0, w1)) = <y_t, w0>_M - <y, w1>_M`` (column-wise)."""
    return np.sum(op.mass_matvec(yt) * w0, axis=0) - np.sum(op.mass_matvec(y) * w1, axis=0)


# ---------------------------------------------------------------------------
# public operations


def _check_control(f: ControlSignal, T: float, dt: float) -> None:
    steps, dt_r = resolve_steps(T, dt)
    if f.steps != steps or abs(f.dt - dt_r) > 1e-12 * dt_r:
        raise ConfigurationError(
            f"control has {f.steps} steps of {f.dt:g}, solver grid has {steps} steps of {dt_r:g}"
        )


def backward_trace(final: FinalData, T: float, dt: float, op: DiscreteOperator) -> TraceSeries:
    """``w_x(., 1)`` on ``[0, T]`` for the backward problem with final data ``final`` at ``T``."""
    final.validate(op)
    steps, dt = resolve_steps(T, dt)
    tr = _backward_traces(op, op.to_active(final.w0), op.to_active(final.w1), dt, steps)
    return TraceSeries(dt, tr)


def backward_state(final: FinalData, T: float, dt: float, op: DiscreteOperator) -> WaveState:
    """``(w(0), w_t(0))`` of the backward problem."""
    final.validate(op)
    steps, dt = resolve_steps(T, dt)
    u, v, _, _, _, _ = integrate(op, op.to_active(final.w0), op.to_active(final.w1), -dt, steps)
    return WaveState(op.to_grid(u), op.to_grid(v), 0.0)


def forward_controlled(y0: GridFunction, y1: GridFunction, f: ControlSignal, T: float, dt: float,
                       op: DiscreteOperator) -> WaveState:
    """State at ``T`` of the wave equation driven by the boundary value ``f`` at ``x = 1``."""
    _check_control(f, T, dt)
    u, v = _forward_controlled(op, op.to_active(y0), op.to_active(y1), f.samples, f.dt)
    # the pinned node carries the boundary value itself
    return WaveState(op.to_grid(u, f.samples[-1]), op.to_grid(v), f.T)


def duality_check(f: ControlSignal, final: FinalData, T: float, dt: float,
                  op: DiscreteOperator, relative: bool = True) -> float:
    """Residual of ``<y_t(T), w0>_M - <y(T), w1>_M + int f w_x(., 1) dt`` for zero initial data.

    ``relative=True`` divides by the sum of the magnitudes of the terms.
    """
    _check_control(f, T, dt)
    w0, w1 = op.to_active(final.w0), op.to_active(final.w1)
    zero = np.zeros(op.size)
    y, yt = _forward_controlled(op, zero, zero, f.samples, f.dt)
    tr = _backward_traces(op, w0, w1, f.dt, f.steps)
    lhs = float(_pairing(op, y, yt, w0, w1))
    coupling = float(trapezoid(f.samples * tr, f.dt))
    res = abs(lhs + coupling)
    if not relative:
        return res
    scale = abs(float(np.dot(op.mass * yt, w0))) + abs(float(np.dot(op.mass * y, w1))) + abs(coupling)
    return res / scale if scale > 0 else res


# ---------------------------------------------------------------------------
# Gramian in energy-normalised modal coordinates


class Gramian:
    """``Lambda(W, V) = int_0^T w_x(t,1) v_x(t,1) dt`` on the lowest ``K`` modes.

    Coordinates ``c = (a, b)`` of length ``2K`` give
    ``W = (sum a_k phi_k / sqrt(lambda_k), sum b_k phi_k)``; then the energy
    of ``W`` is ``|c|^2 / 2`` and ``apply`` returns the coordinates of the
    Riesz representative of ``Lambda(W, .)``.
    """

    def __init__(self, op: DiscreteOperator, T: float, K: int, dt: Optional[float] = None,
                 decomposition: Optional[EigenDecomposition] = None):
        if K < 1:
            raise ConfigurationError("filter order K must be positive")
        self.op = op
        self.steps, self.dt = resolve_steps(T, op.grid.h if dt is None else dt)
        self.T = T
        self.K = K
        dec = decomposition
        if dec is None or dec.op is not op or dec.k < K:
            dec = eigen(op, K)
        self.dec = dec
        self.phi = np.array(dec.vectors[:, :K])
        self.sqrt_lam = np.sqrt(dec.eigenvalues[:K])
        self.stepper = MidpointStepper(op, self.dt)
        self.applications = 0

    # coordinates <-> data
    def synthesize(self, c: np.ndarray):
        c = np.asarray(c, dtype=float)
        a, b = c[: self.K], c[self.K:]
        scale = self.sqrt_lam.reshape((-1,) + (1,) * (c.ndim - 1))
        return self.phi @ (a / scale), self.phi @ b

    def dual_coordinates(self, y: np.ndarray, yt: np.ndarray) -> np.ndarray:
        """Coordinates of ``V -> <y_t, v0>_M - <y, v1>_M``."""
        scale = self.sqrt_lam.reshape((-1,) + (1,) * (np.ndim(y) - 1))
        py = self.phi.T @ self.op.mass_matvec(y)
        pyt = self.phi.T @ self.op.mass_matvec(yt)
        return np.concatenate([pyt / scale, -py], axis=0)

    def coordinates(self, final: FinalData) -> np.ndarray:
        w0, w1 = self.op.to_active(final.w0), self.op.to_active(final.w1)
        a = self.sqrt_lam * (self.phi.T @ self.op.mass_matvec(w0))
        b = self.phi.T @ self.op.mass_matvec(w1)
        return np.concatenate([a, b])

    def final_data(self, c: np.ndarray) -> FinalData:
        w0, w1 = self.synthesize(c)
        return FinalData(self.op.to_grid(w0), self.op.to_grid(w1))

    def traces(self, c: np.ndarray) -> np.ndarray:
        w0, w1 = self.synthesize(c)
        return _backward_traces(self.op, w0, w1, self.dt, self.steps, self.stepper)

    def apply(self, c: np.ndarray) -> np.ndarray:
        """``Lambda c`` via one backward and one controlled forward solve (batched over columns)."""
        c = np.asarray(c, dtype=float)
        self.applications += 1 if c.ndim == 1 else c.shape[1]
        f = self.traces(c)
        zero = np.zeros((self.op.size,) + c.shape[1:])
        y, yt = _forward_controlled(self.op, zero, zero, f, self.dt, self.stepper)
        # Lambda(W, V) = <y(T), v1>_M - <y_t(T), v0>_M
        return -self.dual_coordinates(y, yt)

    def matrix(self) -> np.ndarray:
        return self.apply(np.eye(2 * self.K))

    def quadratic_form(self, c: np.ndarray) -> float:
        """``int_0^T w_x(t,1)^2 dt`` evaluated directly from the backward trace."""
        return float(trapezoid(self.traces(c) ** 2, self.dt))


def _filtered_fraction(final: FinalData, op: DiscreteOperator, K: int) -> float:
    """Share of the energy of ``final`` outside the lowest ``K`` modes."""
    w0, w1 = op.to_active(final.w0), op.to_active(final.w1)
    e = float(energy_of(op, w0, w1))
    if e == 0:
        return 0.0
    dec = eigen(op, K)
    a = np.sqrt(dec.eigenvalues) * dec.coefficients(w0)
    b = dec.coefficients(w1)
    return max(0.0, 1.0 - 0.5 * float(np.sum(a * a) + np.sum(b * b)) / e)


def gramian_apply(final: FinalData, T: float, dt: float, op: DiscreteOperator, K: int,
                  gramian: Optional[Gramian] = None) -> np.ndarray:
    """Modal coordinates of ``Lambda(final, .)``; warns when ``final`` is not filtered."""
    final.validate(op)
    G = gramian if gramian is not None else Gramian(op, T, K, dt)
    frac = _filtered_fraction(final, op, K)
    if frac > 1e-8:
        warnings.warn(f"final data carry {frac:.2e} of their energy outside the lowest {K} modes; "
                      "that part is dropped", RuntimeWarning, stacklevel=2)
    return G.apply(G.coordinates(final))


# ---------------------------------------------------------------------------
# conjugate gradient


@dataclass(frozen=True)
class CGOutcome:
    x: np.ndarray
    iterations: int
    residual: float
    ritz_min: float
    ritz_max: float


def _ritz_extremes(alphas: Sequence[float], betas: Sequence[float]) -> tuple[float, float]:
    """Extreme eigenvalues of the Lanczos matrix encoded by CG step lengths."""
    k = len(alphas)
    if k == 0:
        return float("nan"), float("nan")
    d = np.empty(k)
    e = np.empty(max(k - 1, 0))
    for j in range(k):
        d[j] = 1.0 / alphas[j] + (betas[j - 1] / alphas[j - 1] if j > 0 else 0.0)
        if j < k - 1:
            e[j] = math.sqrt(betas[j]) / alphas[j]
    ev = np.linalg.eigvalsh(np.diag(d) + np.diag(e, 1) + np.diag(e, -1))
    return float(ev[0]), float(ev[-1])


def conjugate_gradient(apply, rhs: np.ndarray, tol: float = CG_TOL,
                       max_iter: int = CG_MAX_ITER) -> CGOutcome:
    """CG for a symmetric operator, stopping at ``|r| <= tol |rhs|``.

    Raises :class:`NotControllableError` on non-positive curvature or when
    the iteration limit is hit.
    """
    b = np.asarray(rhs, dtype=float)
    x = np.zeros_like(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CGOutcome(x, 0, 0.0, float("nan"), float("nan"))
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    alphas: list[float] = []
    betas: list[float] = []
    for it in range(1, max_iter + 1):
        Ap = apply(p)
        curv = float(p @ Ap)
        if not curv > 0.0:
            raise NotControllableError(
                f"Gramian is not coercive: curvature {curv:.3e} at CG iteration {it}",
                iterations=it, residual=math.sqrt(rr) / bnorm)
        a = rr / curv
        x += a * p
        r -= a * Ap
        rr_new = float(r @ r)
        alphas.append(a)
        rel = math.sqrt(rr_new) / bnorm
        if rel <= tol:
            lo, hi = _ritz_extremes(alphas, betas)
            return CGOutcome(x, it, rel, lo, hi)
        beta = rr_new / rr
        betas.append(beta)
        p = r + beta * p
        rr = rr_new
    raise NotControllableError(
        f"CG stagnated: relative residual {math.sqrt(rr) / bnorm:.3e} after {max_iter} iterations",
        iterations=max_iter, residual=math.sqrt(rr) / bnorm)


# ---------------------------------------------------------------------------
# HUM


def weak_energy(op: DiscreteOperator, y: np.ndarray, yt: np.ndarray,
                decomposition: EigenDecomposition, modes: Optional[int] = None) -> float:
    """``(|y|_{L^2}^2 + |y_t|_{H^{-1,mu}}^2) / 2`` over the first ``modes`` (default: all) modes.

    Pass the full eigenbasis for the true discrete norm.
    """
    dec = decomposition
    k = dec.k if modes is None else modes
    cy = dec.coefficients(y)[:k]
    cv = dec.coefficients(yt)[:k]
    return 0.5 * float(np.sum(cy * cy) + np.sum(cv * cv / dec.eigenvalues[:k]))


def hum_solve(y0: GridFunction, y1: GridFunction, T: float, K: int, op: DiscreteOperator,
              cg_tol: float = CG_TOL, dt: Optional[float] = None,
              max_iter: int = CG_MAX_ITER) -> HUMResult:
    """Null control of ``(y0, y1)`` at time ``T`` by HUM on the lowest ``K`` modes.

    ``T`` at or below ``T_alpha`` is allowed and labelled ``below_threshold``;
    CG breakdown raises :class:`NotControllableError`.
    """
    if K > op.grid.N // 10:
        warnings.warn(f"K = {K} exceeds N/10 = {op.grid.N // 10}; high modes are poorly observed",
                      RuntimeWarning, stacklevel=2)
    below = T <= observability_time(op.params.alpha)
    full = eigen(op, op.size)
    G = Gramian(op, T, K, dt, decomposition=full)
    u0, u1 = op.to_active(y0), op.to_active(y1)

    # ell(V) = <y1, v(0)>_M - <y0, v_t(0)>_M = omega(free state at T, V)
    stepper = G.stepper
    yT, ytT, _, _, _, _ = integrate(op, u0, u1, G.dt, G.steps, stepper=stepper)
    ell = G.dual_coordinates(yT, ytT)
    lam_all = full.eigenvalues
    ell_full_sq = (float(np.sum((full.coefficients(ytT) ** 2) / lam_all))
                   + float(np.sum(full.coefficients(yT) ** 2)))
    unfiltered = 0.0 if ell_full_sq == 0 else max(0.0, 1.0 - float(ell @ ell) / ell_full_sq)

    sol = conjugate_gradient(G.apply, ell, tol=cg_tol, max_iter=max_iter)
    f = ControlSignal(G.dt, G.traces(sol.x) if sol.iterations else np.zeros(G.steps + 1))

    y, yt = _forward_controlled(op, u0, u1, f.samples, f.dt, stepper)
    e0 = weak_energy(op, u0, u1, full)
    eT = weak_energy(op, y, yt, full)
    ratio = eT / e0 if e0 > 0 else 0.0
    filtered = weak_energy(op, y, yt, full, K) / e0 if e0 > 0 else 0.0
    final = WaveState(op.to_grid(y, f.samples[-1]), op.to_grid(yt), f.T)
    return HUMResult(f, sol.iterations, sol.residual, ratio, sol.ritz_min, below, T, K,
                     sol.x, unfiltered, filtered, final)


# ---------------------------------------------------------------------------
# observability sweep


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    mu: float
    T: float
    bound: float
    min_quotient: float
    max_quotient: float
    samples: int
    rel_tol: float = GRAMIAN_MARGIN

    @property
    def satisfied(self) -> bool:
        return self.min_quotient >= self.bound * (1.0 - self.rel_tol) if self.bound > 0 else True


def observability_quotients(op: DiscreteOperator, dec: EigenDecomposition, T: float, K: int,
                            mode_count: int, data_count: int, seed: int,
                            dt: Optional[float] = None) -> np.ndarray:
    """``int u_x(t,1)^2 dt / E(0)`` for the first modes and seeded filtered random data."""
    cols_u = [mode_data(dec, k)[0] for k in range(mode_count)]
    U0 = np.column_stack(cols_u) if cols_u else np.zeros((op.size, 0))
    V0 = np.zeros_like(U0)
    if data_count:
        ru, rv = filtered_random_data(dec, K, np.random.default_rng(seed), count=data_count)
        U0, V0 = np.hstack([U0, ru]), np.hstack([V0, rv])
    steps, dt = resolve_steps(T, op.grid.h if dt is None else dt)
    _, _, tr, en, _, _ = integrate(op, U0, V0, dt, steps)
    return trapezoid(tr ** 2, dt) / en[0]


def observability_constant_sweep(p: Parameters, T_list: Sequence[float], K: int, N: int,
                                 mode_count: int = 10, data_count: int = 20, seed: int = 0,
                                 dt: Optional[float] = None) -> list[SweepRow]:
    """Minimal observed quotient per ``T`` against ``(2 - alpha) T - 4``."""
    op = assemble(p, build_grid(N))
    dec = eigen(op, max(K, mode_count))
    rows = []
    for T in T_list:
        q = observability_quotients(op, dec, T, K, mode_count, data_count, seed, dt)
        rows.append(SweepRow(p.alpha, p.mu, float(T), observability_constant(p.alpha, T),
                             float(np.min(q)), float(np.max(q)), int(q.size)))
    return rows
