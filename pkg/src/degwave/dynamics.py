"""Implicit-midpoint time integration of ``u_tt = A u`` and the identities it should satisfy.

Implicit midpoint is the Cayley transform of the Hamiltonian generator, so
it conserves ``E = (v^T M v + u^T S u)/2`` exactly and is time reversible.
Each step solves one SPD tridiagonal system with a factorisation computed
once per ``(op, |dt|)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import ObservabilityError, SolverError, TrajectoryError
from .grid import GridFunction
from .hardy import (
    InequalityReport,
    Parameters,
    direct_constant,
    observability_constant,
)
from .operator import DiscreteOperator, EigenDecomposition

SOLVE_RTOL = 1e-10


@dataclass(frozen=True)
class WaveState:
    u: GridFunction
    v: GridFunction
    t: float = 0.0


class MidpointStepper:
    """Implicit midpoint for ``u' = v, v' = A u (+ forcing)`` on the active nodes.

    The velocity update solves ``(M + dt^2/4 S) v+ = (M - dt^2/4 S) v - dt S u``
    and then ``u+ = u + dt (v + v+)/2``.
    """

    def __init__(self, op: DiscreteOperator, dt: float, rtol: float = SOLVE_RTOL):
        if dt == 0 or not math.isfinite(dt):
            raise ValueError(f"time step must be finite and nonzero, got {dt}")
        self.op = op
        self.dt = float(dt)
        self.rtol = rtol
        q = 0.25 * self.dt ** 2
        self._q = q
        ab = np.zeros((2, op.size))
        ab[0, 1:] = q * op.off
        ab[1, :] = op.mass + q * op.diag
        self._ab = ab
        self._chol = cholesky_banded(ab)

    def _system_matvec(self, x):
        op, q = self.op, self._q
        return op.mass_matvec(x) + q * op.stiffness_matvec(x)

    def step(self, u: np.ndarray, v: np.ndarray, dt: Optional[float] = None):
        """Advance ``(u, v)`` by ``dt`` (default: the stepper's dt; ``-dt`` is allowed)."""
        dt = self.dt if dt is None else dt
        if abs(abs(dt) - abs(self.dt)) > 1e-15 * abs(self.dt):
            raise ValueError("stepper was factored for a different |dt|")
        op, q = self.op, self._q
        Su = op.stiffness_matvec(u)
        rhs = op.mass_matvec(v) - q * op.stiffness_matvec(v) - dt * Su
        v_new = cho_solve_banded((self._chol, False), rhs)
        res = np.linalg.norm(self._system_matvec(v_new) - rhs)
        scale = np.linalg.norm(rhs)
        if not np.isfinite(res) or res > self.rtol * max(scale, 1e-300) and scale > 0:
            raise SolverError(f"midpoint solve residual {res:.3e} exceeds tolerance", res)
        u_new = u + 0.5 * dt * (v + v_new)
        return u_new, v_new


def step(state: WaveState, op: DiscreteOperator, dt: float) -> WaveState:
    """One implicit-midpoint step of ``u_tt = A u``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    u, v = MidpointStepper(op, dt).step(op.to_active(state.u), op.to_active(state.v))
    return WaveState(op.to_grid(u), op.to_grid(v), state.t + dt)


def energy_of(op: DiscreteOperator, u: np.ndarray, v: np.ndarray):
    """Energy of active-node data; vectorised over trailing columns."""
    return 0.5 * (np.sum(v * op.mass_matvec(v), axis=0) + np.sum(u * op.stiffness_matvec(u), axis=0))


def energy(state: WaveState, op: DiscreteOperator) -> float:
    """``(<v, v>_M + u^T S u) / 2``."""
    return float(energy_of(op, op.to_active(state.u), op.to_active(state.v)))


def trapezoid(samples: np.ndarray, dt: float) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] < 2:
        return np.zeros(samples.shape[1:])
    return dt * (np.sum(samples, axis=0) - 0.5 * (samples[0] + samples[-1]))


@dataclass(frozen=True)
class TraceSeries:
    """Uniform samples of ``u_x(t, 1)`` at ``t_m = m dt``."""

    dt: float
    samples: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.samples))

    @property
    def T(self) -> float:
        return self.dt * (len(self.samples) - 1)

    def l2_sq(self) -> float:
        """Trapezoidal ``int_0^T (.)^2 dt``."""
        return float(trapezoid(np.asarray(self.samples) ** 2, self.dt))

    def to_csv(self, path, column: str = "trace") -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", column])
            for t, s in zip(self.times, self.samples):
                w.writerow([f"{t:.12g}", f"{s:.17g}"])


@dataclass(frozen=True, eq=False)
class Trajectory:
    op: DiscreteOperator
    dt: float
    energies: np.ndarray
    trace: TraceSeries
    states_u: Optional[np.ndarray] = field(default=None, repr=False)   # (steps+1, n)
    states_v: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return len(self.energies) - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    @property
    def T(self) -> float:
        return self.dt * self.steps

    def state(self, m: int) -> WaveState:
        if self.states_u is None:
            raise TrajectoryError("trajectory was simulated without stored states")
        return WaveState(self.op.to_grid(self.states_u[m]), self.op.to_grid(self.states_v[m]),
                         m * self.dt)

    def relative_energy_drift(self) -> float:
        e0 = self.energies[0]
        if e0 == 0:
            return float(np.max(np.abs(self.energies)))
        return float(np.max(np.abs(self.energies - e0)) / e0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "E_u", "trace"])
            for t, e, s in zip(self.times, self.energies, self.trace.samples):
                w.writerow([f"{t:.12g}", f"{e:.17g}", f"{s:.17g}"])


def resolve_steps(T: float, dt: float) -> tuple[int, float]:
    """Number of steps covering ``[0, T]`` and the (possibly shortened) uniform step."""
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    return steps, T / steps


def integrate(op: DiscreteOperator, u0: np.ndarray, v0: np.ndarray, dt: float, steps: int,
              store: bool = False, stepper: Optional[MidpointStepper] = None):
    """Integrate active-node data (vectors or column batches) for ``steps`` steps of ``dt``.

    Returns ``(u, v, traces, energies, states_u, states_v)``; states are
    ``None`` unless ``store``.
    """
    stepper = stepper or MidpointStepper(op, abs(dt))
    b = op.trace_weights()
    u = np.array(u0, dtype=float)
    v = np.array(v0, dtype=float)
    traces = np.empty((steps + 1,) + u.shape[1:])
    energies = np.empty((steps + 1,) + u.shape[1:])
    su = sv = None
    if store:
        su = np.empty((steps + 1,) + u.shape)
        sv = np.empty((steps + 1,) + u.shape)
        su[0], sv[0] = u, v
    traces[0] = b @ u
    energies[0] = energy_of(op, u, v)
    for m in range(1, steps + 1):
        u, v = stepper.step(u, v, dt)
        traces[m] = b @ u
        energies[m] = energy_of(op, u, v)
        if store:
            su[m], sv[m] = u, v
    return u, v, traces, energies, su, sv


def simulate(u0: GridFunction, u1: GridFunction, T: float, dt: float, op: DiscreteOperator,
             store: bool = True) -> Trajectory:
    """Integrate the homogeneous system on ``[0, T]`` and record ``u_x(t, 1)`` each step.

    ``dt`` is shortened if needed so an integer number of steps lands on ``T``.
    """
    steps, dt = resolve_steps(T, dt)
    _, _, traces, energies, su, sv = integrate(op, op.to_active(u0), op.to_active(u1), dt, steps,
                                               store=store)
    return Trajectory(op, dt, energies, TraceSeries(dt, traces), su, sv)


# ---------------------------------------------------------------------------
# identities


def _require_states(traj: Trajectory):
    if traj.states_u is None:
        raise TrajectoryError("identity residuals need every state (simulate with store=True)")
    return traj.states_u, traj.states_v


def _rowwise(op: DiscreteOperator, U: np.ndarray, V: np.ndarray):
    """Per-time quadratic forms ``v^T M v``, ``u^T S u`` and ``u^T M v``."""
    S_U = op.stiffness_matvec(U.T).T
    MV = V * op.mass
    return np.sum(V * MV, axis=1), np.sum(U * S_U, axis=1), np.sum(U * MV, axis=1)


def _flux_moment(op: DiscreteOperator, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``int x u_x u_t dx`` per time, with face derivatives averaged to nodes."""
    N, h = op.grid.N, op.grid.h
    full = np.zeros((U.shape[0], N + 1))
    full[:, op.active] = U
    d = np.diff(full, axis=1) / h                       # faces 0..N-1
    faces_left = np.where(op.active > 0, op.active - 1, 0)
    ux = 0.5 * (d[:, faces_left] + d[:, op.active])
    if op.active[0] == 0:
        ux[:, 0] = d[:, 0]   # x_0 = 0 kills this term anyway
    x = op.grid.nodes[op.active]
    return np.sum(op.mass * x * ux * V, axis=1)


@dataclass(frozen=True)
class MultiplierTerms:
    trace_l2: float
    volume: float
    bracket: float

    @property
    def rhs(self) -> float:
        return self.volume + self.bracket

    @property
    def residual(self) -> float:
        return abs(self.trace_l2 - self.rhs)


def multiplier_identity_terms(traj: Trajectory, op: Optional[DiscreteOperator] = None) -> MultiplierTerms:
    """Both sides of the ``x u_x`` multiplier identity.

    ``int u_x(t,1)^2 dt = int int u_t^2 + (1-a)(x^a u_x^2 - mu x^(a-2) u^2)
    + 2 [int x u_x u_t dx]_0^T``.
    """
    op = op or traj.op
    U, V = _require_states(traj)
    kin, pot, _ = _rowwise(op, U, V)
    a = op.params.alpha
    volume = float(trapezoid(kin + (1.0 - a) * pot, traj.dt))
    fm = _flux_moment(op, U[[0, -1]], V[[0, -1]])
    return MultiplierTerms(traj.trace.l2_sq(), volume, 2.0 * float(fm[1] - fm[0]))


def multiplier_identity_residual(traj: Trajectory, op: Optional[DiscreteOperator] = None) -> float:
    return multiplier_identity_terms(traj, op).residual


def lemega_identity_residual(traj: Trajectory, op: Optional[DiscreteOperator] = None) -> float:
    """Residual of ``int int (x^a u_x^2 - mu x^(a-2) u^2 - u_t^2) + [int u u_t]_0^T = 0``."""
    op = op or traj.op
    U, V = _require_states(traj)
    kin, pot, cross = _rowwise(op, U, V)
    return abs(float(trapezoid(pot - kin, traj.dt)) + float(cross[-1] - cross[0]))


def direct_inequality_report(traj: Trajectory, p: Parameters) -> InequalityReport:
    """``int u_x(t,1)^2 dt <= (2T + 4c) E(0)``, ``c = 1`` or ``C'_alpha``."""
    c = direct_constant(p.alpha, traj.T)
    e0 = float(traj.energies[0])
    lhs = traj.trace.l2_sq()
    name = "2T+4" if p.alpha < 1 else "2T+4C'_alpha"
    return InequalityReport("direct", lhs, c * e0, c, name, tol=1e-12 * max(c * e0, 1e-300),
                            details={"E0": e0, "T": traj.T})


def observability_report(traj: Trajectory, p: Parameters, T: Optional[float] = None,
                         rel_tol: float = 0.05) -> InequalityReport:
    """``((2-a) T - 4) E(0) <= int u_x(t,1)^2 dt`` with a relative tolerance on the constant."""
    T = traj.T if T is None else T
    e0 = float(traj.energies[0])
    if e0 <= 0:
        raise ObservabilityError("zero initial energy: observability quotient undefined")
    bound = observability_constant(p.alpha, T)
    lhs_trace = traj.trace.l2_sq()
    return InequalityReport("observability", bound * e0, lhs_trace, bound, "(2-alpha)T-4",
                            tol=rel_tol * abs(bound) * e0,
                            details={"quotient": lhs_trace / e0, "bound": bound, "E0": e0, "T": T})


@dataclass(frozen=True)
class DecayProfile:
    x: np.ndarray
    values: np.ndarray
    decreasing_toward_zero: bool


def trace_decay_check(state: WaveState, alpha: float, count: int = 10) -> DecayProfile:
    """``x^(alpha-1) u^2`` at the ``count`` nodes nearest 0 (excluding ``x = 0``)."""
    x = state.u.grid.nodes[1:count + 1]
    u = state.u.values[1:count + 1]
    vals = x ** (alpha - 1.0) * u * u
    return DecayProfile(x, vals, bool(np.all(np.diff(vals) >= 0)))


# ---------------------------------------------------------------------------
# data


def mode_data(dec: EigenDecomposition, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Active-node data ``(phi_k, 0)`` for the 0-based mode index ``k``."""
    return np.array(dec.vectors[:, k]), np.zeros(dec.op.size)


def filtered_random_data(dec: EigenDecomposition, K: int, rng: np.random.Generator,
                         count: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Random data in the span of the lowest ``K`` modes, energy spread evenly across modes.

    Returns column batches of shape ``(n, count)``.
    """
    if K > dec.k:
        raise ValueError(f"decomposition holds {dec.k} modes, asked for {K}")
    a = rng.standard_normal((K, count))
    b = rng.standard_normal((K, count))
    lam = dec.eigenvalues[:K, None]
    return dec.vectors[:, :K] @ (a / np.sqrt(lam)), dec.vectors[:, :K] @ b
