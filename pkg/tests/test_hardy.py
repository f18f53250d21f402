import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degwave import hardy
from degwave.errors import (
    BoundaryConditionError,
    EquivalenceNotApplicableError,
    ParameterError,
    TransformDomainError,
    UnsupportedRegimeError,
)
from degwave.families import TestFunctionFamily, near_boundary, polynomial_bump
from degwave.grid import GridFunction, build_grid
from degwave.hardy import Parameters

SWEEP = [0.0, 0.25, 0.5, 0.75, 1.25, 1.5, 1.75]


@pytest.fixture(scope="module")
def bump():
    return build_grid(1000).sample(lambda x: x * (1 - x))


@pytest.mark.parametrize("alpha, expected", [(0.0, 0.25), (1.0, 0.0), (1.5, 0.0625), (0.5, 0.0625)])
def test_mu_critical(alpha, expected):
    assert hardy.mu_critical(alpha) == expected


@pytest.mark.parametrize("alpha", [-0.1, 2.0, 3.0])
def test_mu_critical_range(alpha):
    with pytest.raises(ParameterError):
        hardy.mu_critical(alpha)


def test_parameters_validation():
    with pytest.raises(UnsupportedRegimeError):
        Parameters(1.0, 0.0)
    with pytest.raises(ParameterError):
        Parameters(0.0, 0.26)
    assert Parameters(0.5, 0.0).regime == hardy.WD
    assert Parameters(1.5, 0.0).regime == hardy.SD
    assert Parameters.critical(0.5).mu == 0.0625 and Parameters.critical(0.5).is_critical
    assert not Parameters(0.5, -1.0).is_critical


def test_constants():
    assert hardy.poincare_constant(0.0) == 4.0
    assert hardy.sharp_poincare_constant(0.0) == pytest.approx(4 / 3)
    assert hardy.x2_constant(1.5) == pytest.approx(13.0)
    assert hardy.x2_constant(0.5) == 1.0
    assert hardy.equivalence_constants(0.0, 0.125) == (0.5, 1.0)
    assert hardy.equivalence_constants(0.0, -0.25) == (1.0, 2.0)
    assert hardy.observability_time(0.0) == 2.0
    assert hardy.observability_time(0.5) == pytest.approx(8 / 3)
    assert hardy.observability_time(1.5) == 8.0
    assert hardy.direct_constant(1.5, 8.0) == pytest.approx(68.0)
    assert hardy.direct_constant(0.0, 2.0) == 8.0
    assert hardy.observability_constant(0.5, 3.0) == pytest.approx(0.5)


def test_hardy_functional_closed_forms(bump):
    assert hardy.hardy_functional(bump, Parameters(0.0, 0.25)) == pytest.approx(0.25, abs=1e-5)
    s = bump.grid.sample(lambda x: np.sin(np.pi * x))
    assert hardy.hardy_functional(s, Parameters(0.0, 0.0)) == pytest.approx(np.pi ** 2 / 2, rel=1e-5)
    assert hardy.hardy_functional(bump.grid.zeros(), Parameters(0.0, 0.25)) == 0.0


def test_boundary_conditions_enforced():
    g = build_grid(20)
    with pytest.raises(BoundaryConditionError):
        hardy.hardy_functional(g.sample(lambda x: 1 - x), Parameters(0.5, 0.0))
    with pytest.raises(BoundaryConditionError):
        hardy.hardy_functional(g.sample(lambda x: x), Parameters(1.5, 0.0))
    # strongly degenerate data may be nonzero at the origin
    assert hardy.hardy_functional(g.sample(lambda x: 1 - x), Parameters(1.5, 0.0)) > 0


def test_generalized_hardy_anchor(bump):
    r = hardy.check_generalized_hardy(bump, 0.0)
    assert (r.lhs, r.rhs) == pytest.approx((1 / 12, 1 / 3), abs=1e-5)
    assert r.satisfied and r.tol == pytest.approx(1e-5)


def test_poincare_anchor(bump):
    r = hardy.check_poincare(bump, 0.0)
    assert (r.lhs, r.rhs) == pytest.approx((1 / 30, 1.0), abs=1e-5)
    assert r.constant_used == 4.0 and r.details["sharp_constant"] == pytest.approx(4 / 3)
    assert r.details["sharp_rhs"] >= r.lhs


def test_x2_anchor(bump):
    r = hardy.check_x2_bound(bump, 0.0)
    assert (r.lhs, r.rhs) == pytest.approx((2 / 15, 0.25), abs=1e-5)
    assert r.satisfied


def test_weighted_x2_anchor(bump):
    r = hardy.check_theorem_1_1(bump, 0.0)
    assert (r.lhs, r.rhs) == pytest.approx((2 / 15, 0.225), abs=1e-5)
    assert r.satisfied


@pytest.mark.parametrize("check", [hardy.check_generalized_hardy, hardy.check_poincare,
                                   hardy.check_x2_bound, hardy.check_theorem_1_1])
def test_zero_function_gives_equality(check):
    r = check(build_grid(16).zeros(), 0.0)
    assert r.lhs == 0.0 and r.rhs == 0.0 and r.satisfied


def test_norm_equivalence_anchor(bump):
    s = hardy.norm_equivalence_check(bump, Parameters(0.0, 0.125))
    assert s.lower.lhs == pytest.approx(0.5 / 3, abs=1e-5)
    assert s.lower.rhs == pytest.approx(1 / 3 - 1 / 24, abs=1e-5)
    assert s.upper.rhs == pytest.approx(1 / 3, abs=1e-5)
    assert s.satisfied


def test_norm_equivalence_critical_raises(bump):
    with pytest.raises(EquivalenceNotApplicableError):
        hardy.norm_equivalence_check(bump, Parameters.critical(0.0))


def test_strict_mode():
    r = hardy.check_generalized_hardy(build_grid(16).zeros(), 0.0, strict=True)
    assert not r.satisfied


@pytest.mark.parametrize("alpha", SWEEP)
def test_inequalities_hold_on_family(alpha):
    grid = build_grid(400)
    mu_sub = -0.5 if alpha == 0.0 else 0.5 * hardy.mu_critical(alpha)
    for label, u in TestFunctionFamily(alpha, count=60, seed=3).sample(grid):
        for check in (hardy.check_generalized_hardy, hardy.check_poincare,
                      hardy.check_x2_bound, hardy.check_theorem_1_1):
            r = check(u, alpha)
            assert r.satisfied, (label, r)
        assert hardy.norm_equivalence_check(u, Parameters(alpha, mu_sub)).satisfied, label


def test_weighted_x2_near_degenerate_limit_nonnegative_slack():
    grid = build_grid(500)
    for _, u in TestFunctionFamily(1.9, count=40, seed=11).sample(grid):
        assert hardy.check_theorem_1_1(u, 1.9).slack >= -1e-12


def test_hardy_functional_affine_decreasing_in_mu(bump):
    f = [hardy.hardy_functional(bump, Parameters(0.0, m)) for m in (-0.5, 0.0, 0.25)]
    assert f[0] > f[1] > f[2]
    assert f[1] - f[0] == pytest.approx(2 * (f[2] - f[1]), rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.99).filter(lambda a: abs(a - 1) > 1e-3), st.floats(-3.0, 3.0))
def test_square_gap_nonnegative_and_tight(alpha, lam):
    assert hardy.poincare_square_gap(lam, alpha) >= -1e-12
    opt = hardy.poincare_optimal_lambda(alpha)
    assert abs(hardy.poincare_square_gap(opt, alpha)) < 1e-14


def test_appendix_closed_form(bump):
    r = hardy.appendix_transform_identity(bump, 0.0)
    assert r.hardy_side == pytest.approx(0.25, abs=1e-5)
    assert r.transformed_side == pytest.approx(0.25, abs=1e-3)
    assert r.residual_1 <= 1e-3


def test_appendix_zero():
    r = hardy.appendix_transform_identity(build_grid(10).zeros(), 0.5)
    assert r.residual_1 == 0.0 and r.residual_2 == 0.0


@pytest.mark.parametrize("alpha, profile", [
    (0.5, lambda x: x ** 0.9 * (1 - x)),
    (0.0, lambda x: x * (1 - x)),
    (1.5, lambda x: x * x * (1 - x)),
])
def test_appendix_residuals_converge(alpha, profile):
    r = [hardy.appendix_transform_identity(build_grid(N).sample(profile), alpha)
         for N in (250, 500, 1000)]
    for k in (1, 2):
        assert r[k - 1].residual_1 / r[k].residual_1 >= 1.5
    assert r[2].residual_2 < r[0].residual_2


def test_appendix_sd_nonvanishing_origin_still_converges():
    # U ~ x^(1/4) u(0) is only Hoelder near 0, so the rate drops but the residual still shrinks
    prof = lambda x: np.cos(0.5 * np.pi * x)
    r = [hardy.appendix_transform_identity(build_grid(N).sample(prof), 1.5).residual_1
         for N in (250, 500, 1000)]
    assert r[0] > r[1] > r[2]


def test_appendix_rejects_non_finite():
    g = build_grid(10)
    v = np.zeros(11)
    v[4] = np.nan
    with pytest.raises(TransformDomainError):
        hardy.appendix_transform_identity(GridFunction(g, v), 0.5)


def test_family_membership_rules():
    for alpha in (0.5, 1.5):
        fam = list(TestFunctionFamily(alpha, count=200, seed=0))
        assert len(fam) == 200
        grid = build_grid(64)
        for m in fam:
            u = m.sample(grid)
            assert u.values[-1] == 0.0
            if alpha < 1:
                assert m.vanishes_at_zero and abs(u.values[0]) < 1e-12
    sd = list(TestFunctionFamily(1.5, count=200))
    assert any(not m.vanishes_at_zero for m in sd)


def test_family_is_deterministic():
    grid = build_grid(32)
    a = TestFunctionFamily(0.25, count=50, seed=7).sample(grid)
    b = TestFunctionFamily(0.25, count=50, seed=7).sample(grid)
    assert [l for l, _ in a] == [l for l, _ in b]
    for (_, u), (_, v) in zip(a, b):
        np.testing.assert_array_equal(u.values, v.values)


def test_profiles():
    assert polynomial_bump(2, 1).func(np.array([0.5]))[0] == pytest.approx(0.125)
    assert near_boundary(0.5, 0.1).vanishes_at_zero
    assert not near_boundary(1.5, 0.1).vanishes_at_zero
