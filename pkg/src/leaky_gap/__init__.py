"""Bound states and spectral-gap certificates for Schroedinger operators with a
delta interaction supported on a finite planar curve."""
from __future__ import annotations

from .bs_operator import (BoundState, SpectralResult, assemble, bs_eigenvalues, bs_spectrum,
                          discrete_spectrum, solve_bound_state)
from .certificate import (GapCertificate, GapConstants, calibrate, certified_bound, curve_constants,
                          gap_identity_diagnostics, xi_eval)
from .comparison1d import comparison_spectrum, ks_gap_bounds, strong_coupling_residual
from .geometry import CurveSpec, build_curve, geometry_summary

__all__ = [
    "BoundState", "SpectralResult", "assemble", "bs_eigenvalues", "bs_spectrum", "discrete_spectrum",
    "solve_bound_state", "GapCertificate", "GapConstants", "calibrate", "certified_bound",
    "curve_constants", "gap_identity_diagnostics", "xi_eval", "comparison_spectrum", "ks_gap_bounds",
    "strong_coupling_residual", "CurveSpec", "build_curve", "geometry_summary",
]
