from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from scipy.special import k0 as scipy_k0

from conftest import curve, spectrum
from leaky_gap.bs_operator import (BracketFailure, StateNotFound, assemble, bs_eigenvalues,
                                   bs_spectrum, count_states, discrete_spectrum, min_nodes,
                                   solve_bound_state)
from leaky_gap.geometry import CurveSpec, build_curve

# circle of radius r: the operator acts diagonally on e^{i m s / r} with eigenvalue
# r I_m(kappa r) K_m(kappa r); frozen from mpmath
CIRCLE_E = {(5.0, 0): -6.55801082336725, (5.0, 1): -5.24161692796417,
            (10.0, 0): -25.270039064447, (10.0, 1): -24.1930193441876}


def circle_lambda(m, kappa, r=1.0):
    return float(r * mpmath.besseli(m, kappa * r) * mpmath.besselk(m, kappa * r))


def test_assemble_symmetric_positive(unit_circle):
    d = assemble(unit_circle, 1.0, 64)
    assert np.max(np.abs(d.matrix - d.matrix.T)) <= 1e-12
    assert np.all(np.linalg.eigvalsh(d.matrix) > 0)
    assert abs(d.weights.sum() - 2 * math.pi) < 1e-12
    with pytest.raises(ValueError):
        assemble(unit_circle, 0.0, 64)
    with pytest.raises(ValueError):
        assemble(unit_circle, 1.0, 16)


def test_circle_eigenvalues_exact(unit_circle):
    for kappa in (0.3, 1.0, 4.0):
        lam = bs_eigenvalues(unit_circle, kappa, 64, 5)
        ref = [circle_lambda(0, kappa)] + [circle_lambda(1, kappa)] * 2 + [circle_lambda(2, kappa)] * 2
        assert np.allclose(lam, ref, rtol=1e-10, atol=0)


def test_rotation_invariance():
    # the same circle traced from a rotated starting point
    a = build_curve(CurveSpec.circle(1.0), 512)
    b = build_curve(CurveSpec.ellipse(1.0, 1.0, angle=0.7), 512)
    assert abs(bs_eigenvalues(a, 1.0, 64, 1)[0] - bs_eigenvalues(b, 1.0, 64, 1)[0]) < 1e-10


def test_self_convergence_closed(ellipse):
    lam64 = bs_eigenvalues(ellipse, 1.0, 64, 1)[0]
    lam128 = bs_eigenvalues(ellipse, 1.0, 128, 1)[0]
    assert abs(lam64 - lam128) < 1e-8


def _graded_galerkin(L, kappa, panels, grade=3):
    """Piecewise-constant Galerkin eigenvalues on a graded mesh of [0, L]."""
    u = np.linspace(0, 1, panels + 1)
    x = L * np.where(u < 0.5, (2 * u) ** grade / 2, 1 - (2 * (1 - u)) ** grade / 2)
    a, b = x[:-1], x[1:]
    h = b - a

    def g(t):
        at = np.abs(t)
        safe = np.where(at > 0, at, 1.0)
        return np.where(at > 0, 0.5 * t * t * np.log(safe) - 0.75 * t * t, 0.0)

    # exact double integral of -ln|x - y| plus Gauss for the remainder K0(kappa r) + ln r
    log_part = g(b[:, None] - b[None]) - g(b[:, None] - a[None]) - g(a[:, None] - b[None]) \
        + g(a[:, None] - a[None])
    gx, gw = np.polynomial.legendre.leggauss(8)
    q = a[:, None] + (gx[None] + 1) / 2 * h[:, None]
    w = gw[None] * h[:, None] / 2
    r = np.abs(q[:, None, :, None] - q[None, :, None, :])
    safe = np.where(r > 0, r, 1.0)
    rem = np.where(r > 0, scipy_k0(kappa * safe) + np.log(safe),
                   -math.log(kappa / 2) - 0.5772156649015329)
    mat = (log_part + np.einsum("ik,jl,ijkl->ij", w, w, rem)) / (2 * math.pi)
    mat /= np.sqrt(h[:, None] * h[None])
    return np.linalg.eigvalsh(mat)[::-1]


def test_segment_against_graded_galerkin(segment2):
    coarse = _graded_galerkin(2.0, 1.0, 200)[0]
    fine = _graded_galerkin(2.0, 1.0, 400)[0]
    ref = fine + (fine - coarse) / 3
    lam = bs_eigenvalues(segment2, 1.0, 128, 1)[0]
    assert abs(lam - ref) < 1e-5
    assert abs(lam - 0.36164302) < 1e-7


def test_spectrum_structure(unit_circle):
    p = bs_spectrum(assemble(unit_circle, 1.0, 128), 5)
    assert abs(p.values[1] - p.values[2]) < 1e-8
    assert np.all(np.diff(p.values) <= 1e-14)
    w0 = p.densities[:, 0]
    assert np.ptp(w0) < 1e-8 * np.max(np.abs(w0))
    assert np.all(w0 > 0)
    assert np.allclose(p.vectors.T @ p.vectors, np.eye(5), atol=1e-12)
    # weighted orthonormality of densities, i.e. L^2(ds)
    wts = assemble(unit_circle, 1.0, 128).weights
    assert np.allclose((p.densities * wts[:, None]).T @ p.densities, np.eye(5), atol=1e-12)
    assert bs_eigenvalues(unit_circle, 2.0, 64, 1)[0] < bs_eigenvalues(unit_circle, 1.0, 64, 1)[0]


@pytest.mark.parametrize("name", ["circle1", "ellipse", "seg2"])
def test_branches_decreasing_in_kappa(name):
    c = curve(name)
    kappas = np.geomspace(0.05, 20, 10)
    lam = np.array([bs_eigenvalues(c, k, max(128, min_nodes(c, k)), 5) for k in kappas])
    assert np.all(np.diff(lam, axis=0) < 0)


@pytest.mark.parametrize("alpha,j", list(CIRCLE_E))
def test_circle_bound_states_exact(unit_circle, alpha, j):
    st = solve_bound_state(unit_circle, alpha, j, 128)
    assert abs(st.energy - CIRCLE_E[alpha, j]) < 1e-8 * abs(CIRCLE_E[alpha, j])
    assert st.bs_eigenvalue_residual <= 1e-8


def test_bound_state_examples(circle10):
    e0 = circle10.states[0].energy
    assert abs(e0 - (-25.25)) < 1.0
    assert spectrum("circle1", 5.0).states[0].energy > e0
    assert np.all(circle10.states[0].density > 0)


def test_every_coupling_binds():
    for name in ("circle1", "seg2"):
        for alpha in (0.3, 1.0):
            st = solve_bound_state(curve(name), alpha, 0, 128, kappa_min=1e-12)
            assert st.energy < 0


def test_state_not_found(segment2):
    with pytest.raises(StateNotFound):
        solve_bound_state(segment2, 0.3, 1, 128, kappa_min=1e-9)


def test_discrete_spectrum_circle(unit_circle):
    res = discrete_spectrum(unit_circle, 10.0, 256, kappa_min=0.1)
    assert res.n_states >= 2
    e = res.energies
    assert np.all(e < 0) and e[0] < e[1]
    # circle symmetry: multiplicities (1, 2, 2, ...)
    assert np.all(np.diff(e) >= -1e-10)
    assert np.allclose(e[1::2][:len(e[2::2])], e[2::2], atol=1e-9)
    assert abs((e[1] - e[0]) - 1.0) < 0.25
    assert res.n_states == count_states(unit_circle, 10.0, 256, 0.1)


def test_weak_segment_single_state(segment2):
    # kappa of the shallow state is ~7e-5, below the default floor 1e-3 alpha
    res = discrete_spectrum(segment2, 0.3, 256, kappa_min=1e-9)
    assert res.n_states == 1
    assert 0 < res.states[0].kappa < 3e-4
    assert discrete_spectrum(segment2, 0.3, 256).n_states == 0


def test_state_count_monotone_in_alpha(ellipse):
    counts = [discrete_spectrum(ellipse, a, 128).n_states for a in (2.0, 5.0, 10.0)]
    assert counts == sorted(counts) and counts[0] >= 1


def test_self_convergence_ratio(ellipse):
    e = {n: solve_bound_state(ellipse, 5.0, 0, n, refine=False).energy for n in (32, 64, 128, 256)}
    d1, d2 = abs(e[32] - e[64]), abs(e[64] - e[128])
    assert d2 <= d1 / 4 or d2 < 1e-12
    assert abs(e[128] - e[256]) < 1e-9 * abs(e[256])


def test_refinement_raises_node_count(unit_circle):
    res = discrete_spectrum(unit_circle, 40.0, 32, max_states=1)
    assert res.n >= min_nodes(unit_circle, res.states[0].kappa) > 32


def test_bracket_failure_is_distinct():
    assert not issubclass(BracketFailure, StateNotFound)
