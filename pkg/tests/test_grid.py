import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degwave.errors import ConfigurationError, SingularIntegrandError
from degwave.grid import (
    GridFunction,
    boundary_trace_derivative,
    build_grid,
    face_derivative,
    face_weighted_integral,
    power_moment,
    weighted_integral,
    weighted_square_integral,
)


def test_build_grid_small():
    g = build_grid(4)
    np.testing.assert_array_equal(g.nodes, [0, 0.25, 0.5, 0.75, 1])
    np.testing.assert_array_equal(g.faces, [0.125, 0.375, 0.625, 0.875])
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0


def test_build_grid_spacing():
    assert build_grid(1000).h == pytest.approx(1e-3, rel=0, abs=1e-18)


@pytest.mark.parametrize("N", [3, 0, -5, 4.5])
def test_build_grid_rejects(N):
    with pytest.raises(ConfigurationError):
        build_grid(N)


def test_grid_arrays_are_read_only():
    g = build_grid(8)
    with pytest.raises(ValueError):
        g.nodes[1] = 0.3


def test_grid_function_length_checked():
    with pytest.raises(ConfigurationError):
        GridFunction(build_grid(4), np.zeros(4))


def test_grid_function_arithmetic():
    g = build_grid(4)
    a, b = g.sample(lambda x: x), g.sample(lambda x: x * x)
    np.testing.assert_allclose((2 * a - b).values, 2 * g.nodes - g.nodes ** 2)
    np.testing.assert_allclose((-a + b).values, g.nodes ** 2 - g.nodes)


@pytest.mark.parametrize("a, b, p, expected", [
    (0.0, 1.0, 1.0, 0.5),
    (0.0, 1.0, -0.5, 2.0),
    (1.0, 2.0, -2.0, 0.5),
    (1.0, 2.0, -1.0, np.log(2.0)),
    (0.0, 0.5, 0.5, (2.0 / 3.0) * 0.5 ** 1.5),
])
def test_power_moment_closed_forms(a, b, p, expected):
    assert power_moment(a, b, p) == pytest.approx(expected, rel=1e-14)


def test_power_moment_thin_cell_keeps_relative_accuracy():
    # int_{0.5}^{0.5+d} x^-1.5 = 2 (0.5^-0.5 - (0.5+d)^-0.5); series to second order
    d = 1e-9
    exact = 0.5 ** -1.5 * d - 0.75 * 0.5 ** -2.5 * d * d
    assert power_moment(0.5, 0.5 + d, -1.5) == pytest.approx(exact, rel=1e-12)


def test_power_moment_nonintegrable_at_zero_is_infinite():
    assert np.isinf(power_moment(0.0, 0.1, -1.0))


@pytest.mark.parametrize("beta, expected", [(1.0, 0.5), (-0.5, 2.0), (0.0, 1.0), (2.5, 1 / 3.5)])
def test_weighted_integral_constant(beta, expected):
    g = build_grid(1000).sample(lambda x: np.ones_like(x))
    assert weighted_integral(g, beta) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("N", [4, 7, 64])
def test_weighted_integral_exact_for_linear(N):
    g = build_grid(N).sample(lambda x: 3.0 - 2.0 * x)
    # int x^-0.3 (3 - 2x) = 3/0.7 - 2/1.7
    assert weighted_integral(g, -0.3) == pytest.approx(3 / 0.7 - 2 / 1.7, rel=1e-13)


def test_weighted_integral_singular_raises():
    g = build_grid(10).sample(lambda x: np.ones_like(x))
    with pytest.raises(SingularIntegrandError):
        weighted_integral(g, -1.0)


def test_weighted_integral_vanishing_at_zero_allows_beta_below_minus_one():
    g = build_grid(100).sample(lambda x: x)
    # int x^-1.5 * x = 2
    assert weighted_integral(g, -1.5) == pytest.approx(2.0, rel=1e-13)


def test_weighted_square_integral_inverse_square_weight():
    # int x^-2 (x(1-x))^2 = int (1-x)^2 = 1/3
    N = 1000
    g = build_grid(N).sample(lambda x: x * (1 - x))
    assert weighted_square_integral(g, -2.0) == pytest.approx(1 / 3, abs=10 / N ** 2)


def test_weighted_square_integral_exact_for_linear():
    g = build_grid(9).sample(lambda x: 1 - x)
    # int x^0.5 (1-x)^2 = 2/3 - 4/5 + 2/7
    assert weighted_square_integral(g, 0.5) == pytest.approx(2 / 3 - 4 / 5 + 2 / 7, rel=1e-13)


def test_weighted_integral_second_order():
    errs = []
    for N in (50, 100, 200):
        g = build_grid(N).sample(lambda x: np.sin(np.pi * x))
        errs.append(abs(weighted_integral(g, 1.0) - 1.0 / np.pi))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


@pytest.mark.parametrize("f, expected", [
    (lambda x: x, lambda xf: np.ones_like(xf)),
    (lambda x: x * x, lambda xf: 2 * xf),
    (lambda x: 4.0 + 0 * x, lambda xf: np.zeros_like(xf)),
])
def test_face_derivative(f, expected):
    g = build_grid(4).sample(f)
    np.testing.assert_allclose(face_derivative(g), expected(g.grid.faces), atol=1e-14)


def test_face_weighted_integral_shape_checked():
    with pytest.raises(ConfigurationError):
        face_weighted_integral(np.ones(3), build_grid(4), 0.0)


def test_trace_affine_exact():
    g = build_grid(8).sample(lambda x: 1 - x)
    assert boundary_trace_derivative(g) == pytest.approx(-1.0, abs=1e-13)


def test_trace_quadratic_exact():
    g = build_grid(8).sample(lambda x: (1 - x) ** 2)
    assert boundary_trace_derivative(g) == pytest.approx(0.0, abs=1e-12)


def test_trace_sine():
    # d/dx sin(pi x) at 1 is pi cos(pi) = -pi
    g = build_grid(1000).sample(lambda x: np.sin(np.pi * x))
    assert boundary_trace_derivative(g) == pytest.approx(-np.pi, abs=1e-4)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9), st.floats(-0.9, 3.0))
def test_weighted_integral_linear_in_g(vals, beta):
    g = build_grid(8)
    a = GridFunction(g, np.array(vals))
    b = g.sample(lambda x: np.cos(3 * x))
    lhs = weighted_integral(2.0 * a + b, beta)
    rhs = 2.0 * weighted_integral(a, beta) + weighted_integral(b, beta)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9), st.floats(-0.9, 3.0))
def test_square_integral_nonnegative(vals, beta):
    g = GridFunction(build_grid(8), np.array(vals))
    assert weighted_square_integral(g, beta) >= -1e-12
