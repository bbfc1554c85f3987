import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypman import numcore as nc
from hypman.errors import BlowUp, NoRoot, NotMonotone, OutOfDomain


def test_cheb_nodes_small():
    assert np.allclose(nc.cheb_nodes(2), [-1.0, 1.0])
    assert np.allclose(nc.cheb_nodes(3), [-1.0, 0.0, 1.0], atol=1e-15)
    s = np.sqrt(2.0) / 2.0
    assert np.allclose(nc.cheb_nodes(5), [-1.0, -s, 0.0, s, 1.0], atol=1e-15)


def test_cheb_nodes_match_cos_formula():
    n = 17
    x = nc.cheb_nodes(n)
    expected = np.sort(np.cos(np.pi * np.arange(n) / (n - 1)))
    assert np.allclose(x, expected, atol=0)
    assert x[0] == -1.0 and x[-1] == 1.0
    assert np.all(np.diff(x) > 0)


def test_cheb_nodes_rejects_tiny():
    with pytest.raises(ValueError):
        nc.cheb_nodes(1)


def test_interp_exact_at_nodes():
    f = nc.GridFunction.from_callable(np.tanh, 21)
    for xi, vi in zip(f.nodes, f.values):
        assert f(xi) == vi


def test_interp_quadratic_and_zero():
    f = nc.GridFunction.from_callable(lambda x: x * x, 5)
    assert abs(f(0.5) - 0.25) < 1e-14
    z = nc.GridFunction.zeros(9)
    assert z(0.37) == 0.0


def test_interp_sin_against_direct_evaluation():
    f = nc.GridFunction.from_callable(np.sin, 33)
    assert abs(f(0.3) - np.sin(0.3)) < 1e-12


def test_interp_out_of_domain():
    f = nc.GridFunction.zeros(5)
    assert f(1.2) == 0.0  # inside the extrapolation margin
    with pytest.raises(OutOfDomain):
        f(1.3)


@settings(max_examples=30, deadline=None)
@given(
    st.integers(min_value=2, max_value=65),
    st.lists(st.floats(min_value=-2, max_value=2), min_size=1, max_size=8),
    st.floats(min_value=-1, max_value=1),
)
def test_interp_polynomial_exactness(n, coeffs, x):
    # degree <= n-1 polynomials reproduce to 1e-12 for n <= 65
    coeffs = coeffs[:n]
    poly = np.polynomial.Polynomial(coeffs)
    f = nc.GridFunction(poly(nc.cheb_nodes(n)))
    assert abs(f(x) - poly(x)) < 1e-12


def test_derivative_cubic_constant():
    f = nc.GridFunction.from_callable(lambda x: x**3, 9)
    d = f.derivative()
    assert np.max(np.abs(d.values - 3.0 * d.nodes**2)) < 1e-12
    c = nc.GridFunction(np.full(9, 4.2))
    assert np.max(np.abs(c.derivative().values)) < 1e-13


def test_derivative_polynomial_relative_error():
    poly = np.polynomial.Polynomial([0.3, -1.0, 0.5, 2.0, -0.7])
    f = nc.GridFunction(poly(nc.cheb_nodes(17)))
    d = f.derivative()
    exact = poly.deriv()(d.nodes)
    assert np.max(np.abs(d.values - exact)) / np.max(np.abs(exact)) < 1e-9


def test_derivative_exp_second_order():
    f = nc.GridFunction.from_callable(np.exp, 33)
    d2 = nc.derivative(f, 2)
    assert np.max(np.abs(d2.values - np.exp(d2.nodes))) < 1e-9


def test_derivative_order_out_of_range():
    f = nc.GridFunction.zeros(5)
    with pytest.raises(ValueError):
        nc.derivative(f, 0)
    with pytest.raises(ValueError):
        nc.derivative(f, 5)


def test_invert_monotone_basic():
    assert abs(nc.invert_monotone(lambda x: 2 * x, 1.0, (-1, 1)) - 0.5) < 1e-12
    assert abs(nc.invert_monotone(lambda x: x**3 + x, 0.0, (-1, 1))) < 1e-12


def test_invert_monotone_residual_and_roundtrip():
    g = lambda x: 2 * x + 0.05 * np.sin(x)
    tol = 1e-12
    x = nc.invert_monotone(g, 0.7, (-1, 1), tol=tol)
    assert abs(g(x) - 0.7) <= tol
    # forward evaluation round-trips within 2*tol
    y = g(x)
    x2 = nc.invert_monotone(g, y, (-1, 1), tol=tol)
    assert abs(g(x2) - y) <= 2 * tol


def test_invert_monotone_decreasing():
    x = nc.invert_monotone(lambda x: -3 * x + 0.01 * x**3, 0.6, (-1, 1))
    assert abs(-3 * x + 0.01 * x**3 - 0.6) < 1e-12


def test_invert_monotone_errors():
    with pytest.raises(NoRoot):
        nc.invert_monotone(lambda x: 2 * x, 5.0, (-1, 1))
    with pytest.raises(NotMonotone):
        nc.invert_monotone(lambda x: x * x, 0.5, (-1, 1))


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-0.9, max_value=0.9))
def test_invert_monotone_roundtrip_property(x_true):
    g = lambda x: 1.7 * x + 0.2 * np.tanh(3 * x)
    y = g(x_true)
    x = nc.invert_monotone(g, y, (-1, 1), tol=1e-13)
    assert abs(x - x_true) < 1e-10


def test_integrate_constant_field():
    field = nc.OdeField(2, lambda y: np.zeros(2))
    out = nc.integrate(field, np.array([0.3, -0.8]), 0.0, 2.5, 1e-2)
    assert np.allclose(out, [0.3, -0.8], atol=0)


def test_integrate_exponential():
    field = nc.OdeField(1, lambda y: y)
    out = nc.integrate(field, np.array([1.0]), 0.0, 1.0, 1e-3)
    assert abs(out[0] - np.e) < 1e-10


def test_integrate_constant_negative_curvature_pair():
    # a' = -b, b' = -a with (a,b)(0) = (1,-1) has solution (e^t, -e^t)
    field = nc.OdeField(2, lambda y: np.array([-y[1], -y[0]]))
    out = nc.integrate(field, np.array([1.0, -1.0]), 0.0, 1.0, 1e-3)
    assert np.max(np.abs(out - np.array([np.e, -np.e]))) < 1e-9


def test_integrate_fourth_order_convergence():
    field = nc.OdeField(1, lambda y: y)
    err = []
    for step in (1e-2, 5e-3):
        out = nc.integrate(field, np.array([1.0]), 0.0, 1.0, step)
        err.append(abs(out[0] - np.e))
    assert err[0] / err[1] >= 8.0


def test_integrate_backwards():
    field = nc.OdeField(1, lambda y: y)
    out = nc.integrate(field, np.array([1.0]), 0.0, -1.0, 1e-3)
    assert abs(out[0] - 1.0 / np.e) < 1e-10


def test_integrate_blowup():
    field = nc.OdeField(1, lambda y: y * y)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(BlowUp):
            nc.integrate(field, np.array([1.0]), 0.0, 2.0, 1e-3)


def test_integrate_rejects_bad_step():
    field = nc.OdeField(1, lambda y: y)
    with pytest.raises(ValueError):
        nc.integrate(field, np.array([1.0]), 0.0, 1.0, 0.0)


def test_fd_jacobian_identity_and_diagonal():
    assert np.allclose(nc.fd_jacobian(lambda x: x, np.zeros(2)), np.eye(2), atol=1e-10)
    lin = lambda x: np.array([2.0 * x[0], 0.5 * x[1]])
    assert np.allclose(
        nc.fd_jacobian(lin, np.array([0.3, -0.2])), np.diag([2.0, 0.5]), atol=1e-10
    )


def test_fd_jacobian_quadratic_saddle_point():
    fn = lambda x: np.array([2 * x[0] + x[1] ** 2 / 2, x[1] / 2 + x[0] ** 2 / 2])
    j = nc.fd_jacobian(fn, np.array([0.1, 0.2]), h=1e-5)
    assert np.max(np.abs(j - np.array([[2.0, 0.2], [0.1, 0.5]]))) < 1e-8


def test_fd_jacobian_wrap_aware_difference():
    # output wraps mod 1; the plain difference would see a jump of ~1
    def fn(x):
        return np.array([(2 * x[0]) % 1.0, x[1]])

    def diff(a, b):
        d = a - b
        d[0] = (d[0] + 0.5) % 1.0 - 0.5
        return d

    j = nc.fd_jacobian(fn, np.array([0.5, 0.0]), h=1e-6, diff=diff)
    assert np.max(np.abs(j - np.array([[2.0, 0.0], [0.0, 1.0]]))) < 1e-8
