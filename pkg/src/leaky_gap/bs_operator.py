"""Nystrom discretization of the Birman-Schwinger operator on a curve.

The kernel is ``G(x, y) = K0(kappa |x - y|) / 2 pi`` acting on densities in
``L^2(ds)``.  Bound states ``E = -kappa^2`` of the singular Hamiltonian are
the points where ``alpha * lambda_j(kappa) = 1``.

Closed curves use the logarithmic split of the kernel with periodic product
weights; open arcs use Chebyshev nodes in the cosine variable with
log-moment product weights.  For large ``kappa * |x - y|`` the coefficient
``I0`` of the log part is cut off smoothly so that the split never has to
subtract two exponentially large terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg

from .geometry import Curve
from .numerics import bracket_root, chebyshev_log_quadrature, periodic_log_quadrature
from .specfun import bessel_i0, green_values

EULER_GAMMA = 0.5772156649015329
# window on z = kappa r for the log part: 1 below _WIN_LO, 0 above _WIN_HI
_WIN_LO = 0.5
_WIN_HI = 8.0


class StateNotFound(LookupError):
    """No crossing of ``alpha * lambda_j = 1`` above the scan floor."""


class BracketFailure(RuntimeError):
    pass


def _smooth_step(x: np.ndarray) -> np.ndarray:
    # 1 for x <= 0, 0 for x >= 1, C-infinity in between
    x = np.clip(x, 0.0, 1.0)
    out = np.empty_like(x)
    lo, hi = x <= 0.0, x >= 1.0
    mid = ~(lo | hi)
    out[lo], out[hi] = 1.0, 0.0
    xm = x[mid]
    a = np.exp(-1.0 / (1.0 - xm))
    b = np.exp(-1.0 / xm)
    out[mid] = a / (a + b)
    return out


def log_window(z: np.ndarray, zmax: float) -> np.ndarray:
    """Cut-off applied to ``I0(z)`` in the log part; identically 1 when ``zmax <= _WIN_HI``."""
    if zmax <= _WIN_HI:
        return np.ones_like(z)
    return _smooth_step((z - _WIN_LO) / (_WIN_HI - _WIN_LO))


@dataclass(frozen=True, eq=False)
class _Layout:
    """kappa-independent data for one (curve, n) pair."""
    closed: bool
    nodes: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    dist: np.ndarray
    log_term: np.ndarray   # ln(4 sin^2(dt/2)) (closed) or ln|s_i - s_j| (open), 0 on diagonal
    log_weights: np.ndarray
    L: float


@lru_cache(maxsize=32)
def _layout(curve: Curve, n: int) -> _Layout:
    L = curve.L
    if curve.closed:
        q = periodic_log_quadrature(n)
        nodes = q.nodes * (L / (2 * math.pi))
        weights = np.full(n, L / n)
        dt = q.nodes[:, None] - q.nodes[None, :]
        with np.errstate(divide="ignore"):
            lt = np.log(4.0 * np.sin(0.5 * dt) ** 2)
        logw = q.matrix()
    else:
        cq = chebyshev_log_quadrature(n)
        nodes = 0.5 * L * (1.0 + cq.nodes)
        weights = 0.5 * L * cq.weights
        with np.errstate(divide="ignore"):
            lt = np.log(np.abs(nodes[:, None] - nodes[None, :]))
        logw = 0.5 * L * (math.log(0.5 * L) * cq.weights[None, :] + cq.log_weights)
    np.fill_diagonal(lt, 0.0)
    pts = curve.points(nodes)
    d = pts[:, None, :] - pts[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    return _Layout(curve.closed, nodes, pts, weights, dist, lt, logw, L)


@dataclass(frozen=True, eq=False)
class BSDiscretization:
    """Symmetric Nystrom matrix ``W^{1/2} G W^{1/2}`` at one value of kappa."""
    curve: Curve
    kappa: float
    nodes: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray
    points: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.nodes)


def _matrix(lay: _Layout, kappa: float) -> np.ndarray:
    z = kappa * lay.dist
    win = log_window(z, float(z.max()))
    g = green_values(kappa, np.where(lay.dist > 0, lay.dist, 1.0))
    n = len(lay.nodes)
    if lay.closed:
        m1 = -bessel_i0(np.minimum(z, _WIN_HI)) * win / (4 * math.pi)
        m2 = g - m1 * lay.log_term
        diag = (math.log(2.0) - EULER_GAMMA - math.log(kappa * lay.L / (2 * math.pi))) / (2 * math.pi)
        np.fill_diagonal(m2, diag)
        a = (lay.log_weights * m1 + (2 * math.pi / n) * m2) * (lay.L / (2 * math.pi))
        return 0.5 * (a + a.T)
    m1 = -bessel_i0(np.minimum(z, _WIN_HI)) * win / (2 * math.pi)
    m2 = g - m1 * lay.log_term
    np.fill_diagonal(m2, (-math.log(0.5 * kappa) - EULER_GAMMA) / (2 * math.pi))
    q = lay.log_weights * m1 + lay.weights[None, :] * m2
    sw = np.sqrt(lay.weights)
    s = sw[:, None] * q / sw[None, :]
    return 0.5 * (s + s.T)


def assemble(curve: Curve, kappa: float, n: int) -> BSDiscretization:
    """Birman-Schwinger matrix on ``n`` nodes (even ``n`` for closed curves)."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if n < 32:
        raise ValueError("n must be at least 32")
    if curve.closed and n % 2:
        raise ValueError("closed curves need an even node count")
    lay = _layout(curve, n)
    return BSDiscretization(curve, float(kappa), lay.nodes, lay.weights, _matrix(lay, kappa), lay.points)


@dataclass(frozen=True)
class BSEigenpairs:
    values: np.ndarray      # descending
    vectors: np.ndarray     # orthonormal in R^n
    densities: np.ndarray   # vectors / sqrt(weights): orthonormal in L^2(ds)


def _orient(v: np.ndarray) -> np.ndarray:
    sgn = np.sign(v.sum(axis=0))
    sgn[sgn == 0] = 1.0
    return v * sgn


def bs_spectrum(disc: BSDiscretization, k: int) -> BSEigenpairs:
    """Top ``k`` eigenpairs of the discretized operator."""
    n = disc.n
    if not 1 <= k <= n:
        raise ValueError("k must lie in [1, n]")
    w, v = linalg.eigh(disc.matrix, subset_by_index=[n - k, n - 1])
    w, v = w[::-1], _orient(v[:, ::-1])
    return BSEigenpairs(w, v, v / np.sqrt(disc.weights)[:, None])


def bs_eigenvalues(curve: Curve, kappa: float, n: int, k: int) -> np.ndarray:
    """Top ``k`` eigenvalues (descending) without eigenvectors."""
    lay = _layout(curve, n)
    m = _matrix(lay, kappa)
    return linalg.eigh(m, eigvals_only=True, subset_by_index=[n - k, n - 1])[::-1]


@dataclass(frozen=True)
class BoundState:
    index: int
    energy: float
    kappa: float
    nodes: np.ndarray
    weights: np.ndarray
    density: np.ndarray          # L^2(ds)-normalized charge density at the nodes
    bs_eigenvalue: float
    bs_eigenvalue_residual: float
    alpha: float
    n: int
    curve: Curve = field(repr=False, compare=False, default=None)


def default_kappa_min(alpha: float) -> float:
    return 1e-3 * alpha


# kernel width 1/kappa must span a few nodes; max node spacing <= RESOLUTION / kappa
RESOLUTION = 0.25


def min_nodes(curve: Curve, kappa: float) -> int:
    """Smallest node count (multiple of 32) resolving the kernel at ``kappa``."""
    spacing = curve.L if curve.closed else 0.5 * math.pi * curve.L
    need = kappa * spacing / RESOLUTION
    return max(32, 32 * math.ceil(need / 32))


def _solve(curve: Curve, alpha: float, j: int, n: int, tol: float, lo: float) -> BoundState:
    def h(kappa: float) -> float:
        return alpha * bs_eigenvalues(curve, kappa, n, j + 1)[j] - 1.0

    if h(lo) <= 0.0:
        raise StateNotFound(f"state {j} has no crossing above kappa_min={lo:.3g}")
    hi = max(alpha, 2.0 * lo)
    for _ in range(60):
        if h(hi) < 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise BracketFailure("could not bracket the crossing from above")
    kappa = bracket_root(h, lo, hi, tol)
    disc = assemble(curve, kappa, n)
    pairs = bs_spectrum(disc, j + 1)
    lam = float(pairs.values[j])
    return BoundState(index=j, energy=-kappa * kappa, kappa=kappa, nodes=disc.nodes,
                      weights=disc.weights, density=pairs.densities[:, j], bs_eigenvalue=lam,
                      bs_eigenvalue_residual=abs(alpha * lam - 1.0), alpha=float(alpha), n=n,
                      curve=curve)


def solve_bound_state(curve: Curve, alpha: float, j: int, n: int, tol: float = 1e-10,
                      kappa_min: float | None = None, refine: bool = True) -> BoundState:
    """The ``j``-th bound state (0 = ground) by root-finding ``alpha lambda_j(kappa) = 1``.

    With ``refine`` the solve is repeated on ``min_nodes(curve, kappa_j)``
    nodes when ``n`` under-resolves the kernel at the root.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    lo = default_kappa_min(alpha) if kappa_min is None else float(kappa_min)
    state = _solve(curve, alpha, j, n, tol, lo)
    if refine and min_nodes(curve, state.kappa) > n:
        state = _solve(curve, alpha, j, min_nodes(curve, state.kappa), tol, lo)
    return state


@dataclass(frozen=True)
class SpectralResult:
    alpha: float
    states: list
    n_states: int
    n: int                 # node count actually used
    n_requested: int
    kappa_min: float
    tol: float

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.states])


def count_states(curve: Curve, alpha: float, n: int, kappa_min: float) -> int:
    """Number of BS eigenvalues above ``1/alpha`` at the scan floor."""
    vals = np.linalg.eigvalsh(_matrix(_layout(curve, n), kappa_min))
    return int(np.sum(alpha * vals > 1.0))


def discrete_spectrum(curve: Curve, alpha: float, n: int, kappa_min: float | None = None,
                      tol: float = 1e-10, max_states: int | None = None,
                      refine: bool = True) -> SpectralResult:
    """All bound states with ``kappa_j > kappa_min``, ascending in energy.

    Every state is computed on the same node count, raised from ``n`` if the
    ground state needs it (see ``min_nodes``).
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    kmin = default_kappa_min(alpha) if kappa_min is None else float(kappa_min)
    count = count_states(curve, alpha, n, kmin)
    if max_states is not None:
        count = min(count, max_states)
    states: list[BoundState] = []
    n_used = n
    for j in range(count):
        try:
            st = _solve(curve, alpha, j, n_used, tol, kmin)
            if j == 0 and refine and min_nodes(curve, st.kappa) > n_used:
                n_used = min_nodes(curve, st.kappa)
                st = _solve(curve, alpha, j, n_used, tol, kmin)
        except StateNotFound as exc:
            raise BracketFailure(f"branch {j} counted at kappa_min but not found: {exc}") from exc
        states.append(st)
    return SpectralResult(alpha=float(alpha), states=states, n_states=count, n=n_used,
                          n_requested=n, kappa_min=kmin, tol=tol)
