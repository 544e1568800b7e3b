"""Constant chain of the spectral-gap lower bound and its numerical audit.

Evaluates the geometric constants ``c^Gamma_1..5``, calibrates ``eta0`` and
``beta0`` on a declared parameter grid, assembles

    E1 - E0 >= kappa1^2 mu(rho, kappa0) exp(-C0 rho),   rho = kappa0 R,

in log space, and checks the gap identity and the gradient bound on
computed eigenfunctions.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .bs_operator import SpectralResult
from .eigenfunction import (DensityModel, EvaluationGrid, FieldSample, DecayEnvelope, evaluate,
                            l2_norm_boundary, make_grid, norm4_lower)
from .geometry import MAX_COS_THETA, GeometrySummary, delta0, geometry_summary
from .specfun import kernel_floor_constant

C5 = math.sqrt(math.pi)          # 2 int_0^inf sqrt(x) e^{-x} dx
TAU_WORST = 0.5 * (1.0 - MAX_COS_THETA)
THETA_WORST = math.pi / 6
ETA_STEP = 0.01
BETA_STEP = 0.01
BETA_CAP = 1e4
ANGLE_POLICIES = ("worst", "normal")
# ||G * w|| <= ||w||_{L^1} / (NORM2_FACTOR kappa); a point charge attains the constant
NORM2_FACTOR = 2.0 * math.sqrt(math.pi)
NORM2_FACTOR_PRINTED = 2.0 ** 1.5 * math.pi


class CertificateError(ValueError):
    pass


class CertificateRefused(CertificateError):
    """The instance has fewer than two bound states."""


class CalibrationError(CertificateError):
    pass


@dataclass(frozen=True)
class GapConstants:
    C2: float
    C1: float                        # NORM2_FACTOR * C2, used throughout the chain
    C1_printed: float                # 2^{3/2} pi C2, the published pairing
    C5: float
    tau_angle: float
    theta: float
    delta0: float
    b1: float
    cG1: float
    cG2: float
    cG3: float
    cG4: float
    cG5: float
    L: float
    R: float
    M: float
    K: float
    tail_coefficient: float          # 2 / (pi M)
    angle_policy: str = "worst"
    # instance-dependent, filled by calibrate / certified_bound
    kappa0: float | None = None
    rho: float | None = None
    S_script: float | None = None
    T: float | None = None
    D: float | None = None
    zeta: float | None = None
    eta0: float | None = None
    beta0: float | None = None
    C0: float | None = None
    C7: float | None = None
    log_mu: float | None = None
    mu: float | None = None
    C7_factors: dict | None = None

    def to_json(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = dict(v) if isinstance(v, dict) else v
        return out


def curve_constants(summary: GeometrySummary, worst_angle_policy: str = "worst",
                    C2: float | None = None) -> GapConstants:
    """Geometric constants ``c^Gamma_1..5`` at the worst admissible angle.

    ``"normal"`` evaluates them at a perpendicular crossing instead; only
    ``"worst"`` is valid for the gap bound.
    """
    if worst_angle_policy not in ANGLE_POLICIES:
        raise CertificateError(f"unknown angle policy {worst_angle_policy!r}")
    M = summary.M
    if not (M is not None and 0 < M <= 1.0 + 1e-12) or not math.isfinite(M):
        raise CertificateError(f"degenerate injectivity modulus M={M}")
    theta = THETA_WORST if worst_angle_policy == "worst" else 0.5 * math.pi
    tau = 0.5 * (1.0 - abs(math.cos(theta)))
    d0 = delta0(theta, summary.K, M, summary.L)
    b1 = M * d0 / 2
    if C2 is None:
        C2 = kernel_floor_constant().C2
    C1 = NORM2_FACTOR * C2
    cg2 = 1.0 / (math.pi * M * math.sqrt(tau))
    cg1 = cg2 * max(0.0, math.log(M) + math.log((1.0 + math.sqrt(5.0) / 2.0) * d0))
    tail = 2.0 / (math.pi * M)
    cg4 = max(cg2, tail)
    cg3 = cg1 + tail * abs(math.log(d0))
    cg5 = max(2 * cg4, cg3 + cg4 * math.log(max(1.0, summary.L)))
    return GapConstants(C2=C2, C1=C1, C1_printed=NORM2_FACTOR_PRINTED * C2, C5=C5, tau_angle=tau, theta=theta, delta0=d0, b1=b1,
                        cG1=cg1, cG2=cg2, cG3=cg3, cG4=cg4, cG5=cg5, L=summary.L, R=summary.R,
                        M=M, K=summary.K, tail_coefficient=tail, angle_policy=worst_angle_policy)


def zeta(kappa0):
    k = np.asarray(kappa0, dtype=float)
    out = np.where(k >= 0.5, 1.0, -np.log(np.minimum(k, 0.5)) / math.log(2.0))
    return float(out) if out.ndim == 0 else out


# --- log-space building blocks (vectorized over kappa0, rho, alpha) ------------

def log_S_script(kappa, rho, alpha, c: GapConstants):
    """``log S`` with ``S = 2 kappa^2 (R + 1) + C5 rho^{1/2} e^rho + alpha (cG3 + cG4 log max(1, L))``
    and ``R = rho / kappa``."""
    kappa, rho, alpha = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (kappa, rho, alpha)))
    t1 = np.log(2 * kappa * (rho + kappa))
    t2 = math.log(c.C5) + 0.5 * np.log(rho) + rho
    t3 = np.log(alpha * (c.cG3 + c.cG4 * math.log(max(1.0, c.L))))
    return np.logaddexp(np.logaddexp(t1, t2), t3)


def log_T(kappa0, rho, alpha, c: GapConstants):
    return (2 * np.log(c.cG5 * alpha + 1) + np.log(kappa0 ** 2 + 1)
            - math.log(c.C1) - np.log(kappa0 * rho))


def log_D(rho, eta0: float):
    return np.log1p(np.sqrt(2 * rho)) + (eta0 + 2) * rho


def _log_variation(log_b, kappa, rho, alpha, c: GapConstants):
    """``log[b (S + alpha cG4 (|log b| + 1))]``: integral of the gradient bound over length b."""
    grad = np.logaddexp(log_S_script(kappa, rho, alpha, c),
                        np.log(alpha * c.cG4 * (np.abs(log_b) + 1)))
    return log_b + grad


def log_xi(log_b, kappa0, rho, alpha, c: GapConstants, eta0: float):
    """``log xi`` with ``xi = b (S + alpha cG4 (|log b| + 1)) T D (T D + 1)``."""
    ltd = log_T(kappa0, rho, alpha, c) + log_D(rho, eta0)
    return _log_variation(log_b, kappa0, rho, alpha, c) + ltd + np.logaddexp(ltd, 0.0)


def xi_eval(b: float, kappa0: float, rho: float, alpha: float, constants: GapConstants,
            eta0: float | None = None) -> float:
    if not 0 < b < math.exp(-1):
        raise CertificateError("b must lie in (0, 1/e)")
    if not (kappa0 > 0 and rho > 0 and alpha > 0):
        raise CertificateError("kappa0, rho and alpha must be positive")
    eta0 = constants.eta0 if eta0 is None else eta0
    if eta0 is None:
        raise CertificateError("eta0 is not calibrated")
    return float(np.exp(log_xi(math.log(b), kappa0, rho, alpha, constants, eta0)))


def log_b_beta(beta, kappa0, rho, alpha, c: GapConstants):
    """``log b_beta``, ``b_beta = (kappa0 rho)^2 rho / ((alpha cG5 + 1)^6 (kappa0^2 + 1)^4 zeta) e^{-beta rho}``."""
    return (2 * np.log(kappa0 * rho) + np.log(rho) - 6 * np.log(alpha * c.cG5 + 1)
            - 4 * np.log(kappa0 ** 2 + 1) - np.log(zeta(kappa0)) - beta * rho)


def log_b_eta(eta, kappa, rho, alpha, c: GapConstants):
    """Half side ``b = rho / ((cG5 alpha + 1)^2 (kappa^2 + 1)) e^{-eta rho}`` of the norm square."""
    return np.log(rho) - 2 * np.log(c.cG5 * alpha + 1) - np.log(kappa ** 2 + 1) - eta * rho


def _b_cap(c: GapConstants) -> float:
    # probe segments must stay in the range of the gradient bound; b < 1/e for xi
    return min(1.0, c.b1, math.exp(-1) * (1 - 1e-12))


# --- calibration -----------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationGrid:
    alphas: np.ndarray
    kappa0s: np.ndarray
    rhos: np.ndarray

    def mesh(self):
        a, k, r = np.meshgrid(self.alphas, self.kappa0s, self.rhos, indexing="ij")
        return a.ravel(), k.ravel(), r.ravel()

    def refined(self) -> "CalibrationGrid":
        def mid(x):
            if len(x) < 2:
                return x
            lx = np.log(x)
            return np.sort(np.exp(np.concatenate([lx, 0.5 * (lx[1:] + lx[:-1])])))
        return CalibrationGrid(mid(self.alphas), mid(self.kappa0s), mid(self.rhos))

    @property
    def size(self) -> int:
        return len(self.alphas) * len(self.kappa0s) * len(self.rhos)


def instance_grid(alpha: float, kappa0: float, R: float, alpha_range=None,
                  spread: float = 2.0, points: int = 9, alpha_points: int = 5) -> CalibrationGrid:
    """Log grid over ``alpha_range`` and ``kappa0, rho`` within a factor ``spread`` of the instance."""
    lo, hi = alpha_range if alpha_range is not None else (alpha / 2, 2 * alpha)
    if not 0 < lo <= alpha <= hi:
        raise CalibrationError(f"alpha={alpha} outside the declared range [{lo}, {hi}]")

    def axis(lo_, hi_, n, centre):
        return np.unique(np.concatenate([np.geomspace(lo_, hi_, n), [centre]]))

    rho = kappa0 * R
    return CalibrationGrid(axis(lo, hi, alpha_points, alpha),
                           axis(kappa0 / spread, kappa0 * spread, points, kappa0),
                           axis(rho / spread, rho * spread, points, rho))


def _bisect_threshold(ok, lo: np.ndarray, hi: float, iters: int = 60) -> np.ndarray:
    """Smallest x in [lo, hi] with ok(x) (monotone: False below, True above), per component."""
    lo = np.array(lo, dtype=float)
    hi = np.full_like(lo, hi)
    good = ok(hi)
    if not good.all():
        return np.where(good, np.nan, np.inf)
    done = ok(lo)
    a, b = lo.copy(), hi.copy()
    for _ in range(iters):
        m = 0.5 * (a + b)
        g = ok(m)
        b = np.where(g, m, b)
        a = np.where(g, a, m)
    return np.where(done, lo, b)


def _ceil_step(x: float, step: float) -> float:
    return round(math.ceil(x / step - 1e-9) * step, 10)


@dataclass(frozen=True)
class Calibration:
    eta0: float
    beta0: float
    grid: CalibrationGrid = field(repr=False)
    worst_eta_point: tuple
    worst_beta_point: tuple
    sup_xi: float                # on the calibration grid
    sup_xi_refined: float        # on the 2x finer grid
    refined_ok: bool
    max_b_beta0: float
    b_cap: float
    cap_ok: bool
    sup_eta_variation: float
    sanity_rho3_ok: bool         # b_beta <= rho^3 e^{-beta rho}
    sanity_beta3_ok: bool        # b_beta <= 9 e^{-3} beta^{-3}

    def diagnostics(self) -> list:
        return [
            dict(name="eta0_variation", holds=self.sup_eta_variation <= 0.5,
                 value=self.sup_eta_variation, limit=0.5, slack=0.5 / self.sup_eta_variation),
            dict(name="xi_b_beta0", holds=self.sup_xi <= 0.25, value=self.sup_xi, limit=0.25,
                 slack=0.25 / self.sup_xi),
            dict(name="xi_b_beta0_refined_grid", holds=self.refined_ok, value=self.sup_xi_refined,
                 limit=0.25, slack=0.25 / self.sup_xi_refined),
            dict(name="b_beta0_cap", holds=self.cap_ok, value=self.max_b_beta0, limit=self.b_cap,
                 slack=self.b_cap / self.max_b_beta0),
            dict(name="b_beta_sanity", holds=self.sanity_rho3_ok and self.sanity_beta3_ok,
                 value=None, limit=None, slack=None),
        ]


def _calibrate_eta(c: GapConstants, a, k, r) -> tuple[float, int, float]:
    log_cap = math.log(_b_cap(c))

    def ok(eta):
        lb = log_b_eta(eta, k, r, a, c)
        return (lb <= log_cap) & (math.log(4.0) + _log_variation(lb, k, r, a, c) <= math.log(0.5))

    need = _bisect_threshold(ok, np.zeros_like(a), BETA_CAP)
    if not np.all(np.isfinite(need)):
        i = int(np.argmax(np.isinf(need)))
        raise CalibrationError(f"eta search exhausted at alpha={a[i]}, kappa0={k[i]}, rho={r[i]}")
    i = int(np.argmax(need))
    eta0 = _ceil_step(float(need[i]), ETA_STEP)
    lb = log_b_eta(eta0, k, r, a, c)
    var = float(np.max(4.0 * np.exp(_log_variation(lb, k, r, a, c))))
    return eta0, i, var


def _beta_needed(c: GapConstants, eta0: float, a, k, r) -> np.ndarray:
    log_cap = math.log(_b_cap(c))

    def ok(beta):
        lb = log_b_beta(beta, k, r, a, c)
        return (lb <= log_cap) & (log_xi(lb, k, r, a, c, eta0) <= math.log(0.25))

    return _bisect_threshold(ok, np.full_like(a, 2 * eta0 + 5), BETA_CAP)


def calibrate(alpha_range, constants: GapConstants, grid: CalibrationGrid | None = None,
              kappa0: float | None = None, alpha: float | None = None) -> Calibration:
    """Smallest ``eta0`` and ``beta0`` (on 0.01 steps) valid over the declared grid.

    Without an explicit grid one is built around the instance ``(alpha, kappa0)``.
    """
    if grid is None:
        if kappa0 is None or alpha is None:
            raise CalibrationError("need a grid or an instance (alpha, kappa0)")
        grid = instance_grid(alpha, kappa0, constants.R, alpha_range)
    a, k, r = grid.mesh()
    eta0, ie, var = _calibrate_eta(constants, a, k, r)
    need = _beta_needed(constants, eta0, a, k, r)
    if not np.all(np.isfinite(need)):
        i = int(np.argmax(np.isinf(need)))
        raise CalibrationError(f"beta search exhausted (cap {BETA_CAP:g}) at alpha={a[i]}, "
                               f"kappa0={k[i]}, rho={r[i]}")
    ib = int(np.argmax(need))
    beta0 = _ceil_step(float(need[ib]), BETA_STEP)

    def sup_xi(g: CalibrationGrid) -> tuple[float, float, bool, bool]:
        ga, gk, gr = g.mesh()
        lb = log_b_beta(beta0, gk, gr, ga, constants)
        sx = float(np.max(np.exp(log_xi(lb, gk, gr, ga, constants, eta0))))
        s1 = bool(np.all(lb <= 3 * np.log(gr) - beta0 * gr + 1e-12))
        s2 = bool(np.all(lb <= math.log(9.0) - 3.0 - 3 * math.log(beta0) + 1e-12))
        return sx, float(np.max(np.exp(lb))), s1, s2

    sx, bmax, s1, s2 = sup_xi(grid)
    sxr, bmax_r, s1r, s2r = sup_xi(grid.refined())
    cap = _b_cap(constants)
    return Calibration(eta0=eta0, beta0=beta0, grid=grid,
                       worst_eta_point=(float(a[ie]), float(k[ie]), float(r[ie])),
                       worst_beta_point=(float(a[ib]), float(k[ib]), float(r[ib])),
                       sup_xi=sx, sup_xi_refined=sxr, refined_ok=sxr <= 0.25,
                       max_b_beta0=max(bmax, bmax_r), b_cap=cap, cap_ok=max(bmax, bmax_r) <= cap,
                       sup_eta_variation=var, sanity_rho3_ok=s1 and s1r, sanity_beta3_ok=s2 and s2r)


# --- the bound ---------------------------------------------------------------------

def c7_factors(C1: float) -> dict:
    """Factors of ``C7`` along the proof chain (product ``NORM2_FACTOR^2 C1^4 / 4``)."""
    return {
        "strip_half_squared": 0.25,                    # (1/2)^2 from the strip estimate
        "ground_floor_fourth_power": C1 ** 4,          # inf psi0^4 >= C1^4 kappa0^4 ...
        "inverse_norm1_squared": NORM2_FACTOR ** 2,    # 1/||psi1||^2 >= 4 pi kappa1^2 / (L alpha)^2
        "norm4_squared": 1.0,                          # ||psi0||^2 >= rho^2 / (...)^4 (...)^2 e^{-2 eta0 rho}
    }


def log_mu(kappa0: float, rho: float, L: float, alpha: float, cG5: float, C7: float) -> float:
    """``log mu`` with ``mu = C7 (kappa0 rho)^8 / [(L alpha)^2 (1 + sqrt(2 rho))^4
    (kappa0^2 + 1)^10 (cG5 alpha + 1)^16 zeta(kappa0)^2]``."""
    return (math.log(C7) + 8 * math.log(kappa0 * rho) - 2 * math.log(L * alpha)
            - 4 * math.log1p(math.sqrt(2 * rho)) - 10 * math.log(kappa0 ** 2 + 1)
            - 16 * math.log(cG5 * alpha + 1) - 2 * math.log(zeta(kappa0)))


def log_certified_bound(kappa0: float, kappa1: float, R: float, L: float, alpha: float,
                        cG5: float, C1: float, eta0: float, beta0: float) -> float:
    C7 = math.prod(c7_factors(C1).values())
    rho = kappa0 * R
    C0 = 8 + 2 * eta0 + 2 * beta0
    return 2 * math.log(kappa1) + log_mu(kappa0, rho, L, alpha, cG5, C7) - C0 * rho


@dataclass(frozen=True)
class GapCertificate:
    E0: float
    E1: float
    measured_gap: float
    certified_bound: float
    log10_bound: float
    ratio: float | None          # None when the bound underflows
    log10_ratio: float
    holds: bool
    constants: GapConstants
    diagnostics: list
    calibration: Calibration = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {"E0": self.E0, "E1": self.E1, "gap": self.measured_gap,
                "bound": self.certified_bound, "log10_bound": self.log10_bound,
                "ratio": self.ratio, "log10_ratio": self.log10_ratio, "holds": self.holds,
                "constants": self.constants.to_json(), "diagnostics": list(self.diagnostics)}


def _norm_diagnostics(result: SpectralResult, c: GapConstants) -> list:
    out = []
    for st in result.states[:2]:
        model = DensityModel(st)
        sup = model.sup_norm()
        l2 = l2_norm_boundary(st) / sup            # ||psi|| with ||psi||_inf = 1
        for tag, factor in (("", NORM2_FACTOR_PRINTED), ("_corrected", NORM2_FACTOR)):
            rhs1 = c.L * st.alpha / (factor * st.kappa)
            out.append(dict(name=f"norm1{tag}_state{st.index}", holds=l2 <= rhs1, value=l2,
                            limit=rhs1, slack=rhs1 / l2))
        if st.index == 0:
            rhs4 = norm4_lower(st.kappa, c.R, st.alpha, c.cG5, c.eta0)
            out.append(dict(name="norm4_state0", holds=l2 >= rhs4, value=l2, limit=rhs4,
                            slack=l2 / rhs4))
    return out


def certified_bound(result: SpectralResult, constants: GapConstants | None = None,
                    summary: GeometrySummary | None = None, alpha_range=None,
                    calibration: Calibration | None = None, norms: bool = True) -> GapCertificate:
    """Certified lower bound ``kappa1^2 mu exp(-C0 rho)`` against the measured gap."""
    if len(result.states) < 2:
        raise CertificateRefused(f"certificate needs two bound states, found {len(result.states)}")
    s0, s1 = result.states[0], result.states[1]
    if constants is None:
        summary = summary or geometry_summary(s0.curve)
        constants = curve_constants(summary)
    if constants.angle_policy != "worst":
        raise CertificateError("the gap bound needs constants at the worst admissible angle")
    alpha = result.alpha
    k0, k1 = s0.kappa, s1.kappa
    if calibration is None:
        calibration = calibrate(alpha_range, constants, kappa0=k0, alpha=alpha)
    eta0, beta0 = calibration.eta0, calibration.beta0
    rho = k0 * constants.R
    factors = c7_factors(constants.C1)
    C7 = math.prod(factors.values())
    lmu = log_mu(k0, rho, constants.L, alpha, constants.cG5, C7)
    c = dataclasses.replace(
        constants, kappa0=k0, rho=rho,
        S_script=float(np.exp(log_S_script(k0, rho, alpha, constants))),
        T=float(np.exp(log_T(k0, rho, alpha, constants))),
        D=float(np.exp(log_D(rho, eta0))), zeta=zeta(k0), eta0=eta0, beta0=beta0,
        C0=8 + 2 * eta0 + 2 * beta0, C7=C7, log_mu=lmu, mu=math.exp(lmu), C7_factors=factors)
    lb = log_certified_bound(k0, k1, constants.R, constants.L, alpha, constants.cG5,
                             constants.C1, eta0, beta0)
    gap = s1.energy - s0.energy
    bound = math.exp(lb)
    lgap = math.log(gap) if gap > 0 else -math.inf
    holds = bool(gap > 0 and lgap >= lb)
    ratio = gap / bound if bound > 0 else None
    diags = calibration.diagnostics()
    if norms:
        diags += _norm_diagnostics(result, c)
    return GapCertificate(E0=s0.energy, E1=s1.energy, measured_gap=gap, certified_bound=bound,
                          log10_bound=lb / math.log(10), ratio=ratio,
                          log10_ratio=(lgap - lb) / math.log(10), holds=holds, constants=c,
                          diagnostics=diags, calibration=calibration)


# --- gap identity and gradient diagnostics -------------------------------------------

@dataclass(frozen=True)
class GapIdentityReport:
    gap: float
    quotient: float | None
    quotient_tail: float | None
    quotient_deviation: float | None     # |quotient - gap| / gap
    holder_bound: float
    holder_slack: float                  # gap / holder_bound
    grad_f_integral: float
    inf_psi0: float
    leqgrad_violations: int
    leqgrad_samples: int
    probe_points: int
    probe_violations: int
    probe_min_slack: float
    probe_excluded: int

    def diagnostics(self) -> list:
        out = []
        if self.quotient is not None:
            out.append(dict(name="gap_quotient", holds=self.quotient_deviation <= 0.05,
                            value=self.quotient, limit=self.gap, slack=self.quotient_deviation))
        out += [
            dict(name="holder_bound", holds=self.holder_bound <= self.gap, value=self.holder_bound,
                 limit=self.gap, slack=self.holder_slack),
            dict(name="grad_f_pointwise", holds=self.leqgrad_violations == 0,
                 value=self.leqgrad_violations, limit=0, slack=None),
            dict(name="gradient_bound_probes", holds=self.probe_violations == 0,
                 value=self.probe_violations, limit=0, slack=self.probe_min_slack),
        ]
        return out


def probe_points(curve, constants: GapConstants, count: int = 500, d_min: float = 1e-3):
    """Admissible points ``gamma(s) +- d e`` with ``d`` log-spaced in ``[d_min, b]``.

    Directions alternate between the normal and the worst admissible angle;
    ``b = min(1, b1)``.  Returns points and their transversal distances.
    """
    b = min(1.0, constants.b1)
    if b <= d_min:
        raise CertificateError(f"b1={constants.b1:.3g} leaves no room above d_min={d_min}")
    n_base = max(1, count // 10)
    if curve.closed:
        s = (np.arange(n_base) + 0.5) * curve.L / n_base
    else:
        s = (0.1 + 0.8 * (np.arange(n_base) + 0.5) / n_base) * curve.L
    fr = curve.frame(s)
    d = np.geomspace(d_min, b, 5)
    pts, dist = [], []
    for i in range(n_base):
        for th in (0.5 * math.pi, THETA_WORST):
            e = math.cos(th) * fr.tangent[i] + math.sin(th) * fr.normal[i]
            for sgn in (1.0, -1.0):
                for dd in d:
                    pts.append(fr.gamma[i] + sgn * dd * e)
                    dist.append(dd)
    pts, dist = np.array(pts)[:count], np.array(dist)[:count]
    return pts, dist


def gap_identity_diagnostics(result: SpectralResult, grid: EvaluationGrid | None = None,
                             field0: FieldSample | None = None, field1: FieldSample | None = None,
                             constants: GapConstants | None = None, probes: int = 500,
                             quotient: bool = True) -> GapIdentityReport:
    """Gap quotient, Hoelder lower bound, pointwise ``grad f`` inequality and gradient probes.

    Fields must be sup-normalized with gradients on ``grid``.  With
    ``quotient=False`` only the fine block over ``B_R`` is needed.
    """
    if len(result.states) < 2:
        raise CertificateRefused("gap diagnostics need two bound states")
    s0, s1 = result.states[0], result.states[1]
    curve = s0.curve
    summary = geometry_summary(curve)
    constants = constants or curve_constants(summary)
    grid = grid or make_grid(curve, summary)
    pts = grid.points if quotient else grid.points[:grid.n_fine]
    if field0 is None:
        field0 = evaluate(s0, pts, normalization="sup", gradient=True)
    if field1 is None:
        field1 = evaluate(s1, pts, normalization="sup", gradient=True)
    m = len(field0.psi)
    wts = grid.weights[:m]
    p0, p1 = field0.psi, field1.psi
    g0, g1 = field0.grad_psi, field1.grad_psi
    if np.any(p0 <= 0):
        raise CertificateError("ground state is not positive on the grid")
    gap = s1.energy - s0.energy
    cross = p0[:, None] * g1 - p1[:, None] * g0             # psi0^2 grad f
    grad_f = np.hypot(cross[:, 0], cross[:, 1]) / p0 ** 2
    q = qtail = dev = None
    if quotient:
        num = float(np.sum(grad_f ** 2 * p0 ** 2 * wts))
        den = float(np.sum(p1 ** 2 * wts))
        env = DecayEnvelope(grid.R + 1.0, grid.x0, s1.kappa)
        qtail = (s0.kappa + s1.kappa) ** 2 * env.tail_mass(grid.outer) / den
        q = num / den
        dev = abs(q - gap) / gap
    ball = np.zeros(m, dtype=bool)
    ball[:grid.n_fine] = grid.in_ball[:grid.n_fine]
    int_grad_f = float(np.sum(grad_f[ball] * wts[ball]))
    inf0 = float(np.min(p0[ball]))
    n0 = l2_norm_boundary(s0) * field0.scale
    n1 = l2_norm_boundary(s1) * field1.scale
    holder = int_grad_f ** 2 / (n0 ** 2 * n1 ** 2) * inf0 ** 4
    rhs = (np.abs(p1) * np.hypot(g0[:, 0], g0[:, 1]) / p0 ** 2 + np.hypot(g1[:, 0], g1[:, 1]) / p0)
    leq_viol = int(np.sum(grad_f[ball] > rhs[ball] * (1 + 1e-12)))
    # gradient bound on transversal probes, each state with its own S_kappa
    ppts, dist = probe_points(curve, constants, probes)
    viol, slack = 0, math.inf
    for st in (s0, s1):
        fs = evaluate(st, ppts, normalization="sup", gradient=True)
        gn = np.hypot(fs.grad_psi[:, 0], fs.grad_psi[:, 1])
        rho = st.kappa * constants.R
        bound = (float(np.exp(log_S_script(st.kappa, rho, st.alpha, constants)))
                 + st.alpha * constants.cG4 * np.abs(np.log(dist)))
        viol += int(np.sum(gn > bound))
        slack = min(slack, float(np.min(bound / np.maximum(gn, 1e-300))))
    return GapIdentityReport(gap=gap, quotient=q, quotient_tail=qtail, quotient_deviation=dev,
                             holder_bound=holder, holder_slack=gap / holder if holder > 0 else math.inf,
                             grad_f_integral=int_grad_f, inf_psi0=inf0, leqgrad_violations=leq_viol,
                             leqgrad_samples=int(ball.sum()), probe_points=len(ppts),
                             probe_violations=viol, probe_min_slack=slack, probe_excluded=0)
