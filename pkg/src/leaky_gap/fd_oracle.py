"""Finite-difference oracle: thin-well approximation of the curve interaction.

The interaction is replaced by the potential ``-alpha / eps`` on the tube
``{dist(x, Gamma) < eps / 2}``, averaged over each grid cell by supersampling,
inside a Dirichlet box.  The lowest eigenvalues come from LOBPCG with an
algebraic-multigrid preconditioner for ``H - sigma``.  Extrapolation to
``eps, h -> 0`` gives reference energies for the Birman-Schwinger solver.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pyamg
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .bs_operator import SpectralResult, discrete_spectrum
from .numerics import bracket_root
from .eigenfunction import curve_distance
from .geometry import Curve, GeometrySummary, geometry_summary


class OracleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridHamiltonian:
    A: float
    h: float
    eps: float
    alpha: float
    x0: np.ndarray
    n_side: int                     # interior points per side
    matrix: sparse.csr_matrix = field(repr=False)
    potential: np.ndarray = field(repr=False)
    tube_area: float                # area of the cells weighted by tube fraction
    tube_mass: float                # -sum(V) h^2, equals alpha * L up to O(eps K)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def coordinates(self) -> np.ndarray:
        t = -self.A + self.h * np.arange(1, self.n_side + 1)
        gx, gy = np.meshgrid(self.x0[0] + t, self.x0[1] + t, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])


def _laplacian(n: int, h: float) -> sparse.csr_matrix:
    d = sparse.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / h ** 2
    eye = sparse.identity(n)
    return (sparse.kron(d, eye) + sparse.kron(eye, d)).tocsr()


def tube_fraction(curve: Curve | None, points: np.ndarray, h: float, eps: float,
                  supersample: int = 8) -> np.ndarray:
    """Fraction of each ``h x h`` cell centred at ``points`` inside the ``eps``-tube."""
    frac = np.zeros(len(points))
    if curve is None or len(points) == 0:
        return frac
    d, _ = curve_distance(curve, points)
    near = np.nonzero(d < 0.5 * eps + h)[0]
    if len(near) == 0:
        return frac
    off = (np.arange(supersample) + 0.5) / supersample - 0.5
    ox, oy = np.meshgrid(off * h, off * h, indexing="ij")
    sub = (points[near, None, :] + np.stack([ox.ravel(), oy.ravel()], axis=1)[None]).reshape(-1, 2)
    ds, _ = curve_distance(curve, sub)
    frac[near] = np.mean((ds < 0.5 * eps).reshape(len(near), -1), axis=1)
    return frac


def build(curve: Curve | None, alpha: float, A: float, h: float, eps: float,
          summary: GeometrySummary | None = None, supersample: int = 8,
          kappa_expected: float | None = None) -> GridHamiltonian:
    """5-point Dirichlet-box Hamiltonian with the thin well ``-alpha / eps``.

    ``curve=None`` (or ``alpha=0``) gives the free box.
    """
    if not (h > 0 and A > 0 and eps > 0):
        raise OracleError("A, h and eps must be positive")
    if alpha < 0:
        raise OracleError("alpha must be non-negative")
    if eps < 3 * h * (1 - 1e-12):
        raise OracleError(f"tube width eps={eps:.3g} under-resolved: need eps >= 3h = {3 * h:.3g}")
    if curve is not None:
        summary = summary or geometry_summary(curve)
        x0 = np.asarray(summary.x0, dtype=float)
        if kappa_expected is not None and A < 2 * summary.R + 3.0 / kappa_expected - 1e-12:
            raise OracleError(f"box half-width A={A} below 2R + 3/kappa = "
                              f"{2 * summary.R + 3.0 / kappa_expected:.4g}")
        if np.max(np.abs(curve.gamma - x0)) + eps > A:
            raise OracleError("curve tube does not fit inside the box")
    else:
        x0 = np.zeros(2)
    m = int(round(2 * A / h))
    if abs(m * h - 2 * A) > 1e-9 * A:
        raise OracleError("2A must be an integer multiple of h")
    n = m - 1
    H = GridHamiltonian(A, h, eps, alpha, x0, n, None, None, 0.0, 0.0)
    pts = H.coordinates()
    frac = tube_fraction(curve if alpha > 0 else None, pts, h, eps, supersample)
    v = -(alpha / eps) * frac
    mat = (_laplacian(n, h) + sparse.diags(v)).tocsr()
    return GridHamiltonian(A, h, eps, alpha, x0, n, mat, v, float(frac.sum() * h * h),
                           float(-v.sum() * h * h))


@dataclass(frozen=True)
class Modes:
    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)
    residuals: np.ndarray
    iterations: int


def lowest_modes(H: GridHamiltonian, k: int = 2, shift: float | None = None, tol: float = 1e-6,
                 maxiter: int = 400, seed: int = 0) -> Modes:
    """``k`` lowest eigenpairs by preconditioned LOBPCG (AMG on ``H - shift``).

    ``shift`` must lie below the spectrum; the default is the potential floor.
    Residuals ``||Hv - Ev||`` (unit ``v``) are checked against ``tol`` relative
    to ``max(1, |E|)``.
    """
    if not 1 <= k <= 4:
        raise OracleError("k must lie in [1, 4]")
    mat = H.matrix
    sigma = float(H.potential.min()) - 1.0 if shift is None else float(shift)
    shifted = (mat - sigma * sparse.identity(mat.shape[0])).tocsr()
    ml = pyamg.smoothed_aggregation_solver(shifted, symmetry="hermitian", max_coarse=500)
    prec = ml.aspreconditioner(cycle="V")
    rng = np.random.default_rng(seed)
    nb = k + 2
    x = rng.standard_normal((mat.shape[0], nb))
    # bias the start towards the well
    x[:, 0] = np.abs(H.potential) + 1e-3
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        w, v, hist = splinalg.lobpcg(mat, x, M=prec, largest=False, tol=tol * 1e-2, maxiter=maxiter,
                                     retResidualNormsHistory=True)
    order = np.argsort(w)[:k]
    w, v = w[order], v[:, order]
    v = v / np.linalg.norm(v, axis=0)
    res = np.linalg.norm(mat @ v - v * w, axis=0)
    if np.any(res > tol * np.maximum(1.0, np.abs(w))):
        raise OracleError(f"LOBPCG did not converge: residuals {res}")
    return Modes(w, v, res, len(hist))


# --- extrapolation and cross-check ------------------------------------------------

def thin_well_bias(alpha: float, eps: float) -> float:
    """Energy shift of the 1D well ``-alpha/eps`` on ``|x| < eps/2`` relative to ``-alpha^2/4``.

    The even bound state solves ``q tan(q eps / 2) = kappa`` with
    ``q^2 = alpha / eps - kappa^2``.
    """
    if not (alpha > 0 and eps > 0):
        raise OracleError("alpha and eps must be positive")
    if alpha * eps >= math.pi ** 2:
        raise OracleError("well too deep for the single-node bias model (alpha eps >= pi^2)")
    top = math.sqrt(alpha / eps)

    def g(k):
        q = math.sqrt(max(alpha / eps - k * k, 0.0))
        return q * math.tan(0.5 * q * eps) - k

    kappa = bracket_root(g, 0.0, top * (1 - 1e-15), tol=1e-14)
    return -kappa * kappa + 0.25 * alpha * alpha


@dataclass(frozen=True)
class OracleRun:
    h: float
    eps: float
    energies: np.ndarray
    size: int
    ground_positive: bool
    excited_sign_change: bool | None


@dataclass(frozen=True)
class CrosscheckReport:
    alpha: float
    bs_energies: np.ndarray
    fd_extrapolated: np.ndarray
    discrepancy: np.ndarray          # |E_bs - E_fd| / |E_bs|
    runs: list
    A: float
    stages: np.ndarray               # per-eps energies after h-Richardson (and bias correction)
    path: list                       # max discrepancy along the refinement path
    monotone: bool
    bias_corrected: bool


def default_box(summary: GeometrySummary, kappa: float, h: float) -> float:
    """Smallest ``A >= 2R + 3/kappa`` with ``2A`` a multiple of ``h``."""
    need = 2 * summary.R + 3.0 / kappa
    return math.ceil(2 * need / h - 1e-9) * h / 2


def _sign_structure(v: np.ndarray, rel: float = 1e-3):
    big = np.abs(v) > rel * np.max(np.abs(v))
    pos, neg = np.any(v[big] > 0), np.any(v[big] < 0)
    return pos, neg


def fd_energies(curve: Curve, alpha: float, h: float, eps: float, k: int, A: float,
                summary: GeometrySummary | None = None, shift: float | None = None) -> OracleRun:
    H = build(curve, alpha, A, h, eps, summary=summary)
    modes = lowest_modes(H, k, shift=shift)
    pos, neg = _sign_structure(modes.vectors[:, 0])
    exc = None
    if k > 1:
        p1, n1 = _sign_structure(modes.vectors[:, 1])
        exc = bool(p1 and n1)
    return OracleRun(h, eps, modes.energies, H.shape[0], bool(pos != neg), exc)


def crosscheck(curve: Curve, alpha: float, bs_result: SpectralResult | None = None, k: int = 2,
               h: float = 1 / 32, eps_values=None, A: float | None = None,
               bias_correction: bool = True,
               summary: GeometrySummary | None = None) -> CrosscheckReport:
    """Relative discrepancy between BS energies and extrapolated FD energies.

    For each ``eps`` (default ``3h`` and ``6h``) the energies on meshes ``h`` and ``h/2`` are
    Richardson-extrapolated (``O(h^2)``); the straight-line thin-well bias
    ``thin_well_bias(alpha, eps)`` is subtracted and the remainder is
    extrapolated linearly to ``eps = 0``.
    """
    summary = summary or geometry_summary(curve)
    if bs_result is None:
        bs_result = discrete_spectrum(curve, alpha, 256, max_states=k)
    k = min(k, len(bs_result.states))
    if k == 0:
        raise OracleError("no bound states to compare")
    e_bs = bs_result.energies[:k]
    kappa_last = math.sqrt(-e_bs[-1])
    if A is None:
        A = default_box(summary, kappa_last, h)
    elif A < 2 * summary.R + 3.0 / kappa_last:
        raise OracleError(f"box half-width A={A} below 2R + 3/kappa = {2 * summary.R + 3 / kappa_last:.4g}")
    eps_values = (3.0 * h, 6.0 * h) if eps_values is None else tuple(float(e) for e in eps_values)
    if len(eps_values) < 2:
        raise OracleError("need at least two tube widths for the eps extrapolation")
    shift = 2.0 * float(e_bs[0]) - 1.0
    runs, rich, eps_list = [], [], []
    for eps in eps_values:
        coarse = fd_energies(curve, alpha, h, eps, k, A, summary, shift)
        fine = fd_energies(curve, alpha, h / 2, eps, k, A, summary, shift)
        runs += [coarse, fine]
        e = (4.0 * fine.energies - coarse.energies) / 3.0
        if bias_correction:
            e = e - thin_well_bias(alpha, eps)
        rich.append(e)
        eps_list.append(eps)
    rich = np.array(rich)
    coef = np.polyfit(np.array(eps_list), rich, 1)
    fd = coef[-1]
    disc = np.abs(e_bs - fd) / np.abs(e_bs)

    def err(e):
        return float(np.max(np.abs(e_bs - e) / np.abs(e_bs)))

    # raw coarsest run, then h-Richardson at the widest tube, at the thinnest tube,
    # then the eps -> 0 value
    order = np.argsort(eps_list)
    path = [err(runs[2 * order[-1]].energies), err(rich[order[-1]]), err(rich[order[0]]),
            float(np.max(disc))]
    mono = all(path[i + 1] <= path[i] for i in range(len(path) - 1))
    return CrosscheckReport(float(alpha), e_bs, fd, disc, runs, A, rich, path, mono, bias_correction)
