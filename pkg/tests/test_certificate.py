from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import curve, spectrum, summary
from leaky_gap.bs_operator import discrete_spectrum
from leaky_gap.certificate import (BETA_STEP, C5, CalibrationError, CertificateError,
                                   CertificateRefused, calibrate, certified_bound,
                                   curve_constants, gap_identity_diagnostics, instance_grid,
                                   log_b_beta, log_certified_bound, log_mu, log_xi, probe_points,
                                   xi_eval, zeta)
from leaky_gap.eigenfunction import make_grid
from leaky_gap.geometry import GeometrySummary


@pytest.fixture(scope="module")
def circle_consts():
    return curve_constants(summary("circle1"))


@pytest.fixture(scope="module")
def circle_cal(circle_consts, circle10):
    return calibrate(None, circle_consts, kappa0=circle10.states[0].kappa, alpha=10.0)


@pytest.fixture(scope="module")
def circle_cert(circle10):
    return certified_bound(circle10)


def test_circle_constants(circle_consts):
    c = circle_consts
    assert abs(math.sqrt(c.tau_angle) - math.sin(math.pi / 12)) < 1e-12
    assert abs(c.cG2 - 1 / (2 * math.sin(math.pi / 12))) < 1e-9
    assert abs(c.cG2 - 1.9319) < 1e-4
    assert abs(c.cG4 - max(c.cG2, 2 / (math.pi * c.M))) < 1e-12
    assert abs(c.cG5 - max(2 * c.cG4, c.cG3 + c.cG4 * math.log(2 * math.pi))) < 1e-12
    assert c.C5 == C5 and abs(C5 - 1.7724538509) < 1e-9
    for v in (c.C1, c.C2, c.delta0, c.b1, c.cG2, c.cG3, c.cG4, c.cG5):
        assert v > 0 and math.isfinite(v)
    assert c.cG1 >= 0


def test_segment_constants():
    c = curve_constants(summary("seg2"))
    assert c.K == 0 and c.delta0 == 1.0 and c.M == 1.0
    assert all(math.isfinite(v) and v >= 0 for v in (c.cG1, c.cG3, c.cG5))


def test_constant_errors():
    s = summary("circle1")
    with pytest.raises(CertificateError):
        curve_constants(s, "sideways")
    bad = dataclasses.replace(s, M_half=0.0, M_full=0.0)
    with pytest.raises(CertificateError):
        curve_constants(bad)
    normal = curve_constants(s, "normal")
    assert normal.cG2 < curve_constants(s).cG2
    with pytest.raises(CertificateError):
        certified_bound(spectrum("circle1", 10.0), normal)


def test_zeta():
    assert zeta(0.25) == 2.0
    assert zeta(0.5) == 1.0 and zeta(3.0) == 1.0
    assert abs(zeta(0.1) - math.log(10) / math.log(2)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(k=st.floats(1e-6, 10.0), f=st.floats(1.0, 10.0))
def test_zeta_non_increasing(k, f):
    assert zeta(k * f) <= zeta(k)
    assert zeta(k) >= 1


def test_xi_properties(circle_consts, circle_cal, circle10):
    k0 = circle10.states[0].kappa
    rho = k0 * circle_consts.R
    vals = [xi_eval(b, k0, rho, 10.0, circle_consts, circle_cal.eta0) for b in (1e-6, 1e-4, 1e-2)]
    assert vals[0] < vals[1] < vals[2]
    # xi -> 0 with b, but D^2 ~ e^{2 (eta0 + 2) rho} at rho ~ 10 keeps it large at b = 1e-12
    tiny = xi_eval(1e-12, k0, rho, 10.0, circle_consts, circle_cal.eta0)
    assert abs(math.log10(tiny) - 27.156) < 0.01
    assert xi_eval(1e-60, k0, rho, 10.0, circle_consts, circle_cal.eta0) < 1e-6
    with pytest.raises(CertificateError):
        xi_eval(0.5, k0, rho, 10.0, circle_consts, circle_cal.eta0)
    with pytest.raises(CertificateError):
        xi_eval(0.0, k0, rho, 10.0, circle_consts, circle_cal.eta0)
    with pytest.raises(CertificateError):
        xi_eval(1e-3, k0, -1.0, 10.0, circle_consts, circle_cal.eta0)
    with pytest.raises(CertificateError):
        xi_eval(1e-3, k0, rho, 10.0, circle_consts)     # eta0 not calibrated


@settings(max_examples=40, deadline=None)
@given(lb=st.floats(-40.0, -1.5), db=st.floats(0.01, 5.0), k=st.floats(0.1, 20.0),
       r=st.floats(0.1, 40.0), a=st.floats(1.0, 40.0))
def test_xi_increasing_in_b(lb, db, k, r, a):
    c = curve_constants(summary("circle1"))
    hi = min(lb + db, -1.0 - 1e-9)
    if hi <= lb:
        return
    assert log_xi(lb, k, r, a, c, 1.0) < log_xi(hi, k, r, a, c, 1.0)


def test_calibration_circle(circle_cal, circle_consts):
    cal = circle_cal
    assert cal.beta0 >= 2 * cal.eta0 + 5
    assert cal.sup_xi <= 0.25 and cal.refined_ok and cal.sup_xi_refined <= 0.25
    assert cal.cap_ok and cal.max_b_beta0 <= min(1.0, circle_consts.b1)
    assert cal.sanity_rho3_ok and cal.sanity_beta3_ok
    assert cal.sup_eta_variation <= 0.5
    # minimality on the 0.01 step: one step lower breaks the xi condition somewhere
    a, k, r = cal.grid.mesh()
    lb = log_b_beta(cal.beta0 - BETA_STEP, k, r, a, circle_consts)
    lower_ok = (np.max(log_xi(lb, k, r, a, circle_consts, cal.eta0)) <= math.log(0.25)
                and np.all(np.exp(lb) <= min(1.0, circle_consts.b1)))
    assert not lower_ok or cal.beta0 - BETA_STEP < 2 * cal.eta0 + 5


def test_refined_grid_recheck(circle_cal, circle_consts):
    g = circle_cal.grid.refined()
    assert g.size > circle_cal.grid.size
    a, k, r = g.mesh()
    lb = log_b_beta(circle_cal.beta0, k, r, a, circle_consts)
    assert np.max(np.exp(log_xi(lb, k, r, a, circle_consts, circle_cal.eta0))) <= 0.25


@settings(max_examples=60, deadline=None)
@given(beta=st.floats(0.5, 200.0), rho=st.floats(1e-3, 100.0))
def test_b_beta_sanity_bound(beta, rho):
    # rho^3 e^{-beta rho} peaks at rho = 3 / beta with value 27 e^{-3} beta^{-3}
    assert rho ** 3 * math.exp(-beta * rho) <= 27 * math.exp(-3) / beta ** 3 * (1 + 1e-12)


def test_b_beta_printed_sanity_constant():
    # the closing display quotes 9 e^{-3} beta^{-3}; the maximum is three times that
    beta = 7.0
    rho = 3 / beta
    assert rho ** 3 * math.exp(-beta * rho) > 9 * math.exp(-3) / beta ** 3


def test_c9_shape(circle_cal, circle_consts):
    a, k, r = circle_cal.grid.mesh()
    base = 2 * circle_cal.eta0 + 5
    prods = []
    for beta in circle_cal.beta0 + np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0]):
        lb = log_b_beta(beta, k, r, a, circle_consts)
        sup = float(np.max(np.exp(log_xi(lb, k, r, a, circle_consts, circle_cal.eta0))))
        prods.append(sup * (beta - base))
    assert all(np.isfinite(prods))
    assert max(prods) <= max(prods[0], 0.25 * (circle_cal.beta0 - base + 1))


def test_calibration_errors(circle_consts):
    with pytest.raises(CalibrationError):
        calibrate(None, circle_consts)
    with pytest.raises(CalibrationError):
        instance_grid(10.0, 1.0, 2.0, alpha_range=(20.0, 40.0))


def test_certificate_circle(circle_cert):
    c = circle_cert
    assert c.holds and c.log10_ratio > 6
    assert c.measured_gap == c.E1 - c.E0
    assert abs(c.measured_gap - (-24.1930193441876 + 25.270039064447)) < 1e-7
    k = c.constants
    assert k.C0 == 8 + 2 * k.eta0 + 2 * k.beta0
    assert abs(k.C7 - math.prod(k.C7_factors.values())) < 1e-15 * k.C7
    assert k.zeta == 1.0
    names = {d["name"] for d in c.diagnostics}
    assert {"xi_b_beta0", "xi_b_beta0_refined_grid", "b_beta0_cap", "norm4_state0"} <= names
    # every diagnostic holds here, including the printed norm1 form
    assert all(d["holds"] for d in c.diagnostics)


def test_certificate_json_deterministic(circle10):
    a = json.dumps(certified_bound(circle10).to_json(), sort_keys=True)
    b = json.dumps(certified_bound(circle10).to_json(), sort_keys=True)
    assert a == b
    keys = set(json.loads(a))
    assert {"E0", "E1", "gap", "bound", "ratio", "holds", "constants", "diagnostics"} <= keys


def test_refusal_one_state(segment2):
    res = discrete_spectrum(segment2, 0.3, 256, kappa_min=1e-9)
    assert res.n_states == 1
    with pytest.raises(CertificateRefused):
        certified_bound(res)
    with pytest.raises(CertificateRefused):
        gap_identity_diagnostics(res)


def test_doubled_nodes_stable(circle_cert, unit_circle):
    res = discrete_spectrum(unit_circle, 10.0, 512, max_states=2)
    c2 = certified_bound(res)
    assert abs(c2.E0 - circle_cert.E0) < 1e-6 and abs(c2.E1 - circle_cert.E1) < 1e-6
    assert c2.holds == circle_cert.holds


def test_bound_decreasing_in_R(circle_cert):
    k = circle_cert.constants
    k0, k1 = math.sqrt(-circle_cert.E0), math.sqrt(-circle_cert.E1)
    args = (k.L, 10.0, k.cG5, k.C1, k.eta0, k.beta0)
    assert log_certified_bound(k0, k1, 2 * k.R, *args) < log_certified_bound(k0, k1, k.R, *args)


@settings(max_examples=60, deadline=None)
@given(k0=st.floats(0.1, 20.0), rho=st.floats(0.1, 50.0), L=st.floats(0.5, 30.0),
       a=st.floats(0.5, 50.0), g=st.floats(0.5, 50.0), f=st.floats(1.01, 3.0))
def test_mu_monotone(k0, rho, L, a, g, f):
    base = log_mu(k0, rho, L, a, g, 1.0)
    assert log_mu(k0, rho, L, a * f, g, 1.0) < base
    assert log_mu(k0, rho, L * f, a, g, 1.0) < base
    assert log_mu(k0, rho, L, a, g * f, 1.0) < base


@settings(max_examples=40, deadline=None)
@given(R=st.floats(0.2, 10.0), f=st.floats(1.01, 4.0), k0=st.floats(0.5, 10.0))
def test_bound_monotone_in_R_property(R, f, k0):
    c = curve_constants(summary("circle1"))
    k1 = 0.9 * k0
    lo = log_certified_bound(k0, k1, R * f, c.L, 10.0, c.cG5, c.C1, 1.0, 7.0)
    hi = log_certified_bound(k0, k1, R, c.L, 10.0, c.cG5, c.C1, 1.0, 7.0)
    # mu grows like rho^8 but e^{-C0 rho} wins once C0 rho > 8 (C0 >= 24 here)
    if k0 * R >= 8 / 24:
        assert lo < hi


def test_probe_points(unit_circle, circle_consts):
    pts, d = probe_points(unit_circle, circle_consts, 500)
    assert len(pts) == 500
    assert d.min() >= 1e-3 * (1 - 1e-12) and d.max() <= min(1.0, circle_consts.b1) * (1 + 1e-12)
    seg = curve_constants(GeometrySummary(L=2.0, K=0.0, diameter=2.0, R=1.0,
                                          x0=np.zeros(2), M_half=1.0, M_full=1.0, closed=False))
    assert seg.b1 == 0.5


def test_gap_diagnostics_coarse(unit_circle):
    res = spectrum("circle1", 5.0)
    g = make_grid(unit_circle, summary("circle1"), cells=50)
    rep = gap_identity_diagnostics(res, g, quotient=False, probes=200)
    assert rep.quotient is None
    assert 0 < rep.holder_bound <= rep.gap
    assert rep.leqgrad_violations == 0 and rep.leqgrad_samples > 0
    assert rep.probe_points == 200 and rep.probe_violations == 0 and rep.probe_min_slack > 1
    assert all(d["holds"] for d in rep.diagnostics())
