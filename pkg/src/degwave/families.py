"""Analytic and random test profiles for the inequality checks.

Every profile vanishes at ``x = 1``.  Profiles flagged ``vanishes_at_zero``
also vanish at ``x = 0`` and are the only ones offered to the weakly
degenerate regime.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import GridFunction, GridSpec


@dataclass(frozen=True)
class TestProfile:
    label: str
    kind: str
    func: Callable[[np.ndarray], np.ndarray]
    vanishes_at_zero: bool

    __test__ = False  # keep pytest from collecting this class

    def sample(self, grid: GridSpec) -> GridFunction:
        x = grid.nodes
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.asarray(self.func(x), dtype=float) * np.ones_like(x)
        if not np.isfinite(v[0]):
            # unbounded at 0: constant extension over the first cell
            v[0] = v[1]
        v[-1] = 0.0
        return GridFunction(grid, v)


def polynomial_bump(p: float, q: float) -> TestProfile:
    return TestProfile(f"bump(p={p:g},q={q:g})", "bump",
                       lambda x: x ** p * (1.0 - x) ** q, vanishes_at_zero=True)


def sine_mode(k: int) -> TestProfile:
    return TestProfile(f"sin({k}pi x)", "sine", lambda x: np.sin(k * np.pi * x),
                       vanishes_at_zero=True)


def cosine_mode(k: int) -> TestProfile:
    """``cos((k - 1/2) pi x)``: vanishes at 1 only."""
    return TestProfile(f"cos({k - 0.5:g}pi x)", "cosine",
                       lambda x: np.cos((k - 0.5) * np.pi * x), vanishes_at_zero=False)


def near_boundary(alpha: float, eps: float) -> TestProfile:
    """``x**((1 - alpha)/2 + eps) * (1 - x)``, close to the Hardy extremal for small ``eps``."""
    p = 0.5 * (1.0 - alpha) + eps
    return TestProfile(f"near0(eps={eps:g})", "near", lambda x: x ** p * (1.0 - x),
                       vanishes_at_zero=p > 0)


def random_spline(rng: np.random.Generator, vanish_at_zero: bool, index: int = 0) -> TestProfile:
    m = int(rng.integers(4, 13))
    knots = np.linspace(0.0, 1.0, m + 1)
    vals = rng.standard_normal(m + 1)
    vals[-1] = 0.0
    if vanish_at_zero:
        vals[0] = 0.0
    spline = CubicSpline(knots, vals, bc_type="natural")
    return TestProfile(f"spline#{index}(m={m})", "spline", spline,
                       vanishes_at_zero=vanish_at_zero)


@dataclass(frozen=True)
class TestFunctionFamily:
    """Deterministic family of profiles admissible for a given ``alpha``.

    The analytic members come first; seeded random splines fill the family up
    to ``count`` members.
    """

    alpha: float
    count: int = 200
    seed: int = 0

    __test__ = False

    def analytic(self) -> list[TestProfile]:
        wd = self.alpha < 1.0
        members = [polynomial_bump(p, q) for p in (1, 1.5, 2, 3, 5) for q in (1, 2, 3)]
        members += [sine_mode(k) for k in (1, 2, 3, 5, 8, 13)]
        members += [near_boundary(self.alpha, eps) for eps in (0.02, 0.05, 0.1, 0.25, 0.5)]
        if not wd:
            members += [cosine_mode(k) for k in (1, 2, 3, 5)]
            members += [TestProfile(f"(1-x)^{q}", "poly", lambda x, q=q: (1.0 - x) ** q,
                                    vanishes_at_zero=False) for q in (1, 2, 3)]
        return [m for m in members if m.vanishes_at_zero or not wd]

    def __iter__(self) -> Iterator[TestProfile]:
        members = self.analytic()[: self.count]
        rng = np.random.default_rng(self.seed)
        wd = self.alpha < 1.0
        i = 0
        while len(members) < self.count:
            # strongly degenerate splines alternate between free and pinned u(0)
            members.append(random_spline(rng, vanish_at_zero=wd or i % 2 == 1, index=i))
            i += 1
        return iter(members)

    def __len__(self) -> int:
        return self.count

    def sample(self, grid: GridSpec) -> list[tuple[str, GridFunction]]:
        return [(m.label, m.sample(grid)) for m in self]
