from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import curve, spectrum, summary
from leaky_gap.fd_oracle import (OracleError, build, crosscheck, default_box, fd_energies,
                                 lowest_modes, thin_well_bias)


def box_energy(A, h):
    """Lowest eigenvalue of the 5-point Dirichlet Laplacian on (-A, A)^2."""
    return 2 * (4 / h ** 2) * math.sin(math.pi * h / (4 * A)) ** 2


def test_free_box():
    H = build(None, 0.0, 2.0, 1 / 16, 3 / 16)
    e = lowest_modes(H, 2).energies
    assert abs(e[0] - 2 * (math.pi / 4) ** 2) < 5e-3 * 2 * (math.pi / 4) ** 2
    assert abs(e[0] - box_energy(2.0, 1 / 16)) < 1e-6
    # zero coupling with a curve present is the same free box
    Hc = build(curve("circle1"), 0.0, 2.0, 1 / 16, 3 / 16)
    assert np.all(Hc.potential == 0)
    assert abs(lowest_modes(Hc, 1).energies[0] - e[0]) < 1e-6
    assert abs(H.matrix - H.matrix.T).max() == 0


def test_tube_area_and_mass(unit_circle):
    h1 = build(unit_circle, 10.0, 4.75, 1 / 16, 3 / 16)
    h2 = build(unit_circle, 10.0, 4.75, 1 / 32, 3 / 16)
    assert abs(h2.tube_area - h1.tube_area) < 0.02 * h1.tube_area
    for H in (h1, h2):
        # potential mass per unit length alpha, up to O(eps K)
        assert abs(H.tube_mass - 10.0 * unit_circle.L) < 0.02 * 10.0 * unit_circle.L
        assert abs(H.tube_area - 3 / 16 * unit_circle.L) < 0.02 * 3 / 16 * unit_circle.L


def test_deep_state_and_large_assembly(unit_circle):
    big = build(unit_circle, 10.0, 8.0, 1 / 64, 3 / 64)
    assert big.shape[0] == (2 * 8 * 64 - 1) ** 2
    H = build(unit_circle, 10.0, 4.75, 1 / 64, 3 / 64)
    m = lowest_modes(H, 1, shift=-60.0)
    assert m.energies[0] < -20
    assert m.residuals[0] <= 1e-6 * abs(m.energies[0])


def test_monotone_in_eps_and_sign_structure(unit_circle):
    h = 1 / 16
    runs = [fd_energies(unit_circle, 10.0, h, f * h, 2, 4.75) for f in (3.0, 4.5, 6.0)]
    e0 = [r.energies[0] for r in runs]
    e1 = [r.energies[1] for r in runs]
    # thinner tubes bind deeper: energies increase with eps
    assert e0[0] < e0[1] < e0[2] and e1[0] < e1[1] < e1[2]
    for r in runs:
        assert r.ground_positive and r.excited_sign_change


def test_thin_well_bias():
    vals = [thin_well_bias(10.0, e) for e in (0.2, 0.1, 0.05, 0.01, 1e-4)]
    assert all(v > 0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))
    # kappa = alpha/2 - alpha^2 eps/12 + ..., so the shift is alpha^3 eps / 12 to leading order
    assert abs(vals[-1] / (1000 * 1e-4 / 12) - 1) < 0.01
    with pytest.raises(OracleError):
        thin_well_bias(10.0, 1.0)
    with pytest.raises(OracleError):
        thin_well_bias(0.0, 0.1)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.5, 40.0), f=st.floats(0.05, 0.9))
def test_bias_vanishes_with_eps(alpha, f):
    eps = f * math.pi ** 2 / alpha
    assert 0 < thin_well_bias(alpha, eps / 2) < thin_well_bias(alpha, eps)


def test_build_errors(unit_circle):
    with pytest.raises(OracleError, match="under-resolved"):
        build(unit_circle, 10.0, 4.75, 1 / 16, 2 / 16)
    with pytest.raises(OracleError, match="2R"):
        build(unit_circle, 10.0, 3.0, 1 / 16, 3 / 16, kappa_expected=5.0)
    with pytest.raises(OracleError):
        build(unit_circle, 10.0, 1.05, 1 / 20, 3 / 20)        # tube leaves the box
    with pytest.raises(OracleError):
        build(unit_circle, 10.0, 4.7, 1 / 3, 1.0)             # 2A not a multiple of h
    with pytest.raises(OracleError):
        build(unit_circle, -1.0, 4.75, 1 / 16, 3 / 16)
    with pytest.raises(OracleError):
        lowest_modes(build(None, 0.0, 1.0, 1 / 8, 3 / 8), 5)


def test_default_box():
    s = summary("circle1")
    A = default_box(s, 5.0, 1 / 32)
    assert A >= 2 * s.R + 3 / 5 and A - (2 * s.R + 3 / 5) < 1 / 32
    assert abs(2 * A * 32 - round(2 * A * 32)) < 1e-9


def test_crosscheck_coarse(unit_circle):
    rep = crosscheck(unit_circle, 5.0, spectrum("circle1", 5.0), h=1 / 8)
    assert rep.fd_extrapolated.shape == (2,)
    assert np.all(rep.discrepancy < 0.02)
    assert len(rep.runs) == 4 and rep.stages.shape == (2, 2)
    # along the refinement path the discrepancy never grows
    assert rep.monotone and rep.path[-1] == float(np.max(rep.discrepancy))
    with pytest.raises(OracleError):
        crosscheck(unit_circle, 5.0, spectrum("circle1", 5.0), h=1 / 8, eps_values=[3 / 8])
    with pytest.raises(OracleError):
        crosscheck(unit_circle, 5.0, spectrum("circle1", 5.0), h=1 / 8, A=2.0)
