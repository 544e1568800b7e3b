from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from leaky_gap.numerics import (NumericsError, adaptive_integrate, bracket_root,
                                chebyshev_log_quadrature, periodic_log_quadrature, symmetric_eigen)
from leaky_gap.specfun import bessel_k


def test_jacobi_trivial_cases():
    assert np.allclose(symmetric_eigen(np.eye(3)).eigenvalues, [1, 1, 1])
    assert np.allclose(symmetric_eigen(np.diag([3.0, 1.0, 2.0])).eigenvalues, [3, 2, 1])
    r = symmetric_eigen(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(r.eigenvalues, [1, -1], atol=1e-14)
    v = r.eigenvectors
    assert np.allclose(np.abs(v[:, 0]), [2 ** -0.5] * 2)
    assert abs(v[0, 1] * v[1, 1] + 0.5) < 1e-14


def test_jacobi_rejects_non_symmetric():
    with pytest.raises(ValueError):
        symmetric_eigen(np.array([[0.0, 1.0], [0.0, 0.0]]))


@settings(max_examples=50, deadline=None)
@given(arrays(float, (4, 4), elements=st.floats(-10, 10)))
def test_jacobi_vs_characteristic_polynomial(a):
    a = 0.5 * (a + a.T)
    r = symmetric_eigen(a)
    roots = np.sort(np.real(np.roots(np.poly(a))))[::-1]
    assert np.max(np.abs(r.eigenvalues - roots)) < 1e-9 * max(1.0, np.max(np.abs(a)))


@settings(max_examples=30, deadline=None)
@given(arrays(float, (7, 7), elements=st.floats(-5, 5)))
def test_jacobi_residual_and_orthogonality(a):
    a = 0.5 * (a + a.T)
    r = symmetric_eigen(a)
    norm = max(np.linalg.norm(a), 1e-300)
    res = np.linalg.norm(a @ r.eigenvectors - r.eigenvectors * r.eigenvalues, axis=0)
    assert np.all(res <= 1e-10 * norm + 1e-300)
    assert np.allclose(r.eigenvectors.T @ r.eigenvectors, np.eye(7), atol=1e-10)
    assert np.all(np.diff(r.eigenvalues) <= 0)


def test_bracket_root_examples():
    assert abs(bracket_root(lambda x: x - 2, 0, 5) - 2) < 1e-12
    assert abs(bracket_root(lambda x: math.exp(-x) - 0.5, 0, 10) - math.log(2)) < 1e-12
    root = bracket_root(lambda x: bessel_k(0, x) - 0.1, 0.1, 10, tol=1e-13)
    ref = float(mpmath.findroot(lambda x: mpmath.besselk(0, x) - 0.1, 1.75))
    assert abs(root - ref) < 1e-11
    # frozen mpmath value; K0(1.7527) = 0.1549, so 1.7527 is not the root
    assert abs(root - 2.1064116249) < 1e-9
    with pytest.raises(NumericsError):
        bracket_root(lambda x: x * x + 1, -1, 1)


@settings(max_examples=50, deadline=None)
@given(c=st.floats(-50, 50), slope=st.floats(0.1, 10))
def test_bracket_root_monotone_property(c, slope):
    f = lambda x: slope * (x - c) + 0.1 * math.sin(x - c)  # noqa: E731
    x = bracket_root(f, -100, 100, tol=1e-12)
    assert abs(x - c) <= 1e-9 * max(1.0, abs(c))


def test_periodic_log_examples():
    for n in (16, 64):
        q = periodic_log_quadrature(n)
        t = q.nodes
        assert abs(q.integrate(np.ones(n), np.zeros(n))) < 1e-12
        assert abs(q.integrate(np.cos(t), np.zeros(n)) + 2 * math.pi) < 1e-12
        ref = 2 * math.pi * float(mpmath.besseli(0, 1))
        assert abs(q.integrate(np.zeros(n), np.exp(np.cos(t))) - ref) < 1e-12
    assert abs(2 * math.pi * float(mpmath.besseli(0, 1)) - 7.95493) < 1e-5


def test_periodic_log_exact_on_trig_polynomials():
    n = 32
    q = periodic_log_quadrature(n)
    t = q.nodes
    for m in range(1, n // 2):
        # int ln(4 sin^2(t/2)) cos(m t) dt = -2 pi / m
        assert abs(q.integrate(np.cos(m * t), np.zeros(n)) + 2 * math.pi / m) < 1e-11
        assert abs(q.integrate(np.sin(m * t), np.zeros(n))) < 1e-11


def test_periodic_log_convergence_order():
    # a(t) = 1 / (1.5 - cos t) is analytic, not a trig polynomial
    def ref():
        f = lambda t: mpmath.log(4 * mpmath.sin(t / 2) ** 2) / (1.5 - mpmath.cos(t))  # noqa: E731
        return float(mpmath.quad(f, [0, mpmath.pi, 2 * mpmath.pi]))
    exact = ref()
    errs = []
    for n in (16, 32, 64):
        q = periodic_log_quadrature(n)
        errs.append(abs(q.integrate(1 / (1.5 - np.cos(q.nodes)), np.zeros(n)) - exact))
    assert errs[1] <= errs[0] / 4 and errs[2] <= max(errs[1] / 4, 1e-13)


def test_periodic_log_rejects_odd():
    with pytest.raises(ValueError):
        periodic_log_quadrature(33)
    with pytest.raises(ValueError):
        periodic_log_quadrature(8)


def test_chebyshev_log_weights():
    q = chebyshev_log_quadrature(16)
    assert abs(q.weights.sum() - 2.0) < 1e-14
    for i in (0, 5, 11):
        xi = q.nodes[i]
        # int_{-1}^{1} ln|xi - x| dx
        ref = (1 - xi) * math.log(1 - xi) + (1 + xi) * math.log(1 + xi) - 2
        assert abs(q.log_weights[i].sum() - ref) < 1e-10
        ref2 = float(mpmath.quad(lambda x: mpmath.log(abs(xi - x)) * x ** 3, [-1, xi, 1]))
        assert abs(q.log_weights[i] @ q.nodes ** 3 - ref2) < 1e-10


def test_adaptive_integrate_examples():
    val = adaptive_integrate(lambda x: 2 * math.sqrt(x) * math.exp(-x), 0, 50, tol=1e-12)
    tail = 2 * math.sqrt(50) * math.exp(-50) * 2       # crude bound on the truncated tail
    assert abs(val + tail - math.sqrt(math.pi)) < 1e-10
    assert abs(val - 1.772454) < 1e-6
    assert abs(adaptive_integrate(lambda x: 1.0, 0, 1) - 1) < 1e-14
    assert abs(adaptive_integrate(lambda x: math.log(1 / x), 0, 1) - 1) < 1e-10


def test_adaptive_integrate_failure():
    with pytest.raises(NumericsError):
        adaptive_integrate(lambda x: 1 / x, 0, 1, tol=1e-12, max_depth=5)
