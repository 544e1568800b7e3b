"""Eigenfunctions off the curve and pointwise diagnostics.

``psi(x) = int G(x - gamma(s)) w(s) ds`` is evaluated from the Nystrom
density.  Targets close to the curve are handled by resampling the density
(trigonometric interpolation on closed curves, Chebyshev interpolation on
arcs) until the node spacing is below a third of the target distance.
Targets closer than the finest resampling can resolve get a graded
Gauss-Legendre rule on a short window around their foot point.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft
from scipy.spatial import ConvexHull, Delaunay, QhullError, cKDTree

from .bs_operator import BoundState
from .geometry import Curve, GeometrySummary, geometry_summary
from .numerics import fejer_weights
from .specfun import SingularEvaluationError, bessel_k0, bessel_k01, green_values_and_radial

_MAX_NODES = 1 << 18
_CHUNK = 1 << 22  # kernel evaluations per block
_NEAR_CELLS = 8   # half-width of the near window, in finest-panel cells
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


# --- density resampling ---------------------------------------------------

def _resample_closed(w: np.ndarray, m: int) -> np.ndarray:
    n = len(w)
    if m == n:
        return w.copy()
    c = np.fft.rfft(w)
    if n % 2 == 0:
        c[-1] *= 0.5  # split the Nyquist mode symmetrically
    out = np.zeros(m // 2 + 1, dtype=complex)
    out[:len(c)] = c
    return np.fft.irfft(out, m) * (m / n)


def _resample_open(w: np.ndarray, m: int) -> np.ndarray:
    # nodes x_j = -cos((j+1/2) pi / n): reverse to the standard DCT ordering
    n = len(w)
    if m == n:
        return w.copy()
    # unnormalized DCT-II then DCT-III round-trips with a factor 2n
    c = np.zeros(m)
    c[:n] = fft.dct(w[::-1], type=2) / (2 * n)
    return fft.dct(c, type=3)[::-1]


@dataclass(frozen=True, eq=False)
class _Panel:
    points: np.ndarray
    charge: np.ndarray   # quadrature weight times density
    spacing: float       # largest node spacing


class DensityModel:
    """Resampled versions of a state's charge density, cached by node count."""

    def __init__(self, state: BoundState):
        if state.curve is None:
            raise ValueError("bound state carries no curve")
        self.state = state
        self.curve: Curve = state.curve
        self._cache: dict[int, _Panel] = {}

    def panel(self, m: int) -> _Panel:
        if m in self._cache:
            return self._cache[m]
        c, st = self.curve, self.state
        if c.closed:
            s = np.arange(m) * (c.L / m)
            w = _resample_closed(st.density, m)
            q = w * (c.L / m)
            h = c.L / m
        else:
            u = (np.arange(m) + 0.5) * np.pi / m
            s = 0.5 * c.L * (1.0 - np.cos(u))
            w = _resample_open(st.density, m)
            q = w * 0.5 * c.L * fejer_weights(m)
            h = 0.5 * c.L * math.pi / m
        p = _Panel(c.points(s), q, h)
        self._cache[m] = p
        return p

    def density_at(self, s: np.ndarray) -> np.ndarray:
        """Interpolated density at arbitrary arc-length positions."""
        st, c = self.state, self.curve
        s = np.asarray(s, dtype=float)
        if c.closed:
            n = st.n
            coef = np.fft.rfft(st.density) / n
            coef[1:] *= 2.0
            if n % 2 == 0:
                coef[-1] *= 0.5
            k = np.arange(len(coef))
            return np.real(np.exp(2j * np.pi * np.outer(s / c.L, k)) @ coef)
        a = fft.dct(st.density[::-1], type=2) / st.n
        a[0] *= 0.5
        return np.polynomial.chebyshev.chebval(2.0 * s / c.L - 1.0, a)

    def cell_edges(self, m: int) -> np.ndarray:
        """Arc-length edges of the quadrature cells of ``panel(m)`` (``m + 1`` values)."""
        c = self.curve
        if c.closed:
            return (np.arange(m + 1) - 0.5) * (c.L / m)
        return 0.5 * c.L * (1.0 - np.cos(np.arange(m + 1) * np.pi / m))

    def fine_density(self, factor: int = 16) -> tuple[np.ndarray, np.ndarray]:
        m = self.state.n * factor
        c = self.curve
        if c.closed:
            return np.arange(m) * (c.L / m), _resample_closed(self.state.density, m)
        u = (np.arange(m) + 0.5) * np.pi / m
        return 0.5 * c.L * (1.0 - np.cos(u)), _resample_open(self.state.density, m)

    def sup_norm(self) -> float:
        """``max |psi|`` attained on the curve, via the trace identity ``alpha psi = w``."""
        return float(np.max(np.abs(self.fine_density()[1]))) / self.state.alpha


def curve_distance(curve: Curve, points: np.ndarray, oversample: int = 8):
    """Distance from each point to the curve and the foot-point arc length.

    Nearest dense sample from a KD-tree, then Newton projection.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = max(4096, oversample * curve.n_samples)
    s = np.linspace(0.0, curve.L, m, endpoint=not curve.closed)
    tree = cKDTree(curve.points(s))
    _, idx = tree.query(points)
    sp = s[idx]
    for _ in range(4):
        fr = curve.frame(sp)
        diff = points - fr.gamma
        f = np.sum(diff * fr.tangent, axis=1)
        df = -1.0 + fr.kappa * np.sum(diff * fr.normal, axis=1)
        ok = df < -0.1
        step = np.where(ok, f / np.where(ok, df, -1.0), 0.0)
        step = np.clip(step, -curve.L / m, curve.L / m)
        sp = sp - step
        sp = np.mod(sp, curve.L) if curve.closed else np.clip(sp, 0.0, curve.L)
    d = np.hypot(*(points - curve.points(sp)).T)
    return d, sp


def _top_level(model: DensityModel) -> int:
    return int(math.log2(_MAX_NODES // model.state.n))


def _refinement_level(model: DensityModel, d: np.ndarray) -> np.ndarray:
    """Doublings of the node count needed for spacing <= d / 3 (not capped)."""
    base = model.panel(model.state.n).spacing
    with np.errstate(divide="ignore"):
        lev = np.ceil(np.log2(3.0 * base / np.maximum(d, 1e-300)))
    return np.clip(lev, 0, 1 << 20).astype(int)


def _graded_offsets(length: float, d: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes and weights on ``[0, length]`` graded geometrically towards 0 down to ``d``."""
    cuts = [length]
    while cuts[-1] > max(d, 1e-14 * length):
        cuts.append(0.5 * cuts[-1])
    cuts.append(0.0)
    t, w = [], []
    for a, b in zip(cuts[1:], cuts[:-1]):
        t.append(a + 0.5 * (b - a) * (_GL_X + 1.0))
        w.append(0.5 * (b - a) * _GL_W)
    return np.concatenate(t), np.concatenate(w)


def _near_field(model: DensityModel, x: np.ndarray, d: np.ndarray, foot: np.ndarray, grad: bool):
    """Finest panel away from the foot point plus a graded rule on the cells around it."""
    c, kappa = model.curve, model.state.kappa
    m = model.state.n << _top_level(model)
    p = model.panel(m)
    edges = None if c.closed else model.cell_edges(m)
    psi = np.zeros(len(x))
    g = np.zeros((len(x), 2)) if grad else None
    for i, (xi, di, si) in enumerate(zip(x, d, foot)):
        if c.closed:
            j0 = int(round(si * m / c.L))
            lo_j, hi_j = j0 - _NEAR_CELLS, j0 + _NEAR_CELLS
            idx = np.arange(lo_j, hi_j + 1) % m
            lo, hi = (lo_j - 0.5) * c.L / m, (hi_j + 0.5) * c.L / m
        else:
            j0 = int(np.clip(np.searchsorted(edges, si) - 1, 0, m - 1))
            lo_j, hi_j = max(0, j0 - _NEAR_CELLS), min(m - 1, j0 + _NEAR_CELLS)
            idx = np.arange(lo_j, hi_j + 1)
            lo, hi = edges[lo_j], edges[hi_j + 1]
        keep = np.ones(m, dtype=bool)
        keep[idx] = False
        far = _Panel(p.points[keep], p.charge[keep], p.spacing)
        v, gv = _accumulate(far, kappa, xi[None], grad)
        s_mid = min(max(si, lo), hi)
        tl, wl = _graded_offsets(s_mid - lo, di) if s_mid > lo else (np.zeros(0), np.zeros(0))
        tr, wr = _graded_offsets(hi - s_mid, di) if hi > s_mid else (np.zeros(0), np.zeros(0))
        sq = np.concatenate([s_mid - tl, s_mid + tr])
        wq = np.concatenate([wl, wr])
        near = _Panel(c.points(sq), wq * model.density_at(sq), p.spacing)
        vn, gn = _accumulate(near, kappa, xi[None], grad)
        psi[i] = v[0] + vn[0]
        if grad:
            g[i] = gv[0] + gn[0]
    return psi, g


def _on_curve(model: DensityModel, foot: np.ndarray, grad: bool):
    """Trace ``w / alpha`` on the curve; gradient as the mean of the one-sided limits."""
    st, c = model.state, model.curve
    if np.any(np.isin(foot, st.nodes)):
        raise SingularEvaluationError("evaluation point coincides with a quadrature node")
    psi = model.density_at(foot) / st.alpha
    if not grad:
        return psi, None
    fr = c.frame(foot)
    delta = 1e-9 * c.L
    x = np.vstack([fr.gamma + delta * fr.normal, fr.gamma - delta * fr.normal])
    _, g = _near_field(model, x, np.full(len(x), delta), np.concatenate([foot, foot]), True)
    return psi, 0.5 * (g[:len(foot)] + g[len(foot):])


def _accumulate(panel: _Panel, kappa: float, x: np.ndarray, grad: bool):
    psi = np.zeros(len(x))
    g = np.zeros((len(x), 2)) if grad else None
    m = len(panel.charge)
    step = max(1, _CHUNK // m)
    for i0 in range(0, len(x), step):
        xi = x[i0:i0 + step]
        dx = xi[:, None, 0] - panel.points[None, :, 0]
        dy = xi[:, None, 1] - panel.points[None, :, 1]
        r = np.hypot(dx, dy)
        if np.any(r == 0.0):
            raise SingularEvaluationError("evaluation point coincides with a quadrature node")
        if grad:
            val, dval = green_values_and_radial(kappa, r)
            psi[i0:i0 + step] = val @ panel.charge
            f = dval / r * panel.charge
            g[i0:i0 + step, 0] = np.sum(f * dx, axis=1)
            g[i0:i0 + step, 1] = np.sum(f * dy, axis=1)
        else:
            z = kappa * r
            live = z < 700.0
            k0 = np.zeros_like(z)
            k0[live] = bessel_k0(z[live])
            psi[i0:i0 + step] = (k0 @ panel.charge) / (2.0 * math.pi)
    return psi, g


@dataclass(frozen=True)
class FieldSample:
    points: np.ndarray
    psi: np.ndarray
    grad_psi: np.ndarray | None
    kappa: float
    normalization: str       # "sup" or "l2"
    scale: float             # raw field multiplied by this factor
    distance: np.ndarray = field(repr=False, default=None)


def l2_norm_boundary(state: BoundState, factor: int = 8) -> float:
    """``||psi_raw||`` from the boundary form with kernel ``r K1(kappa r) / (4 pi kappa)``."""
    model = DensityModel(state)
    p = model.panel(state.n * factor)
    k = state.kappa
    total = 0.0
    m = len(p.charge)
    step = max(1, _CHUNK // m)
    for i0 in range(0, m, step):
        d = p.points[i0:i0 + step, None, :] - p.points[None, :, :]
        r = np.hypot(d[..., 0], d[..., 1])
        h = np.full_like(r, 1.0 / (4 * math.pi * k * k))
        live = (r > 0) & (k * r < 700.0)
        h[live] = r[live] * bessel_k01(k * r[live])[1] / (4 * math.pi * k)
        h[(r > 0) & ~live] = 0.0
        total += p.charge[i0:i0 + step] @ h @ p.charge
    return math.sqrt(total)


def evaluate(state: BoundState, points, normalization: str = "sup", gradient: bool = True,
             model: DensityModel | None = None) -> FieldSample:
    """Field (and gradient) of ``state`` at arbitrary points off the nodes."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    model = model or DensityModel(state)
    if normalization == "sup":
        scale = 1.0 / model.sup_norm()
    elif normalization == "l2":
        scale = 1.0 / l2_norm_boundary(state)
    elif normalization == "raw":
        scale = 1.0
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    d, foot = curve_distance(state.curve, x)
    level = _refinement_level(model, d)
    top = _top_level(model)
    psi = np.zeros(len(x))
    grad = np.zeros((len(x), 2)) if gradient else None
    for lev in np.unique(level):
        sel = np.nonzero(level == lev)[0]
        if lev > top:
            on = d[sel] <= 1e-13 * state.curve.L
            p = np.zeros(len(sel))
            g = np.zeros((len(sel), 2)) if gradient else None
            if np.any(~on):
                p[~on], g_off = _near_field(model, x[sel][~on], d[sel][~on], foot[sel][~on], gradient)
                if gradient:
                    g[~on] = g_off
            if np.any(on):
                p[on], g_on = _on_curve(model, foot[sel][on], gradient)
                if gradient:
                    g[on] = g_on
        else:
            p, g = _accumulate(model.panel(state.n << int(lev)), state.kappa, x[sel], gradient)
        psi[sel] = p
        if gradient:
            grad[sel] = g
    psi *= scale
    if gradient:
        grad *= scale
    return FieldSample(x, psi, grad, state.kappa, normalization, scale, d)


# --- grids -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EvaluationGrid:
    """Cell-centred grid: fine block on the square around ``B_R``, coarse ring outside.

    Points ``[:n_fine]`` form the fine block in row-major order
    (``fine_shape``); the rest is the coarse ring out to ``outer`` from ``x0``.
    """
    x0: np.ndarray
    R: float
    spacing: float
    coarse_spacing: float
    outer: float
    fine_shape: tuple[int, int]
    points: np.ndarray
    weights: np.ndarray

    @property
    def n_fine(self) -> int:
        return self.fine_shape[0] * self.fine_shape[1]

    @property
    def radius(self) -> np.ndarray:
        return np.hypot(*(self.points - self.x0).T)

    @property
    def in_ball(self) -> np.ndarray:
        return self.radius <= self.R


def make_grid(curve: Curve, summary: GeometrySummary | None = None, cells: int = 200,
              coarse_ratio: int = 5, outer_factor: float = 4.0) -> EvaluationGrid:
    """Grid with spacing ``R / cells`` on ``[x0 - R, x0 + R]^2`` and a ring to ``outer_factor R``."""
    summary = summary or geometry_summary(curve)
    R, x0 = summary.R, np.asarray(summary.x0, dtype=float)
    h = R / cells
    hc = coarse_ratio * h
    nf = 2 * cells
    t = -R + (np.arange(nf) + 0.5) * h
    fx, fy = np.meshgrid(x0[0] + t, x0[1] + t, indexing="ij")
    fine = np.column_stack([fx.ravel(), fy.ravel()])
    nc_half = int(math.ceil(outer_factor * R / hc))
    tc = (np.arange(-nc_half, nc_half) + 0.5) * hc
    cx, cy = np.meshgrid(tc, tc, indexing="ij")
    keep = (np.abs(cx) > R) | (np.abs(cy) > R)
    coarse = np.column_stack([cx[keep] + x0[0], cy[keep] + x0[1]])
    pts = np.vstack([fine, coarse])
    wts = np.concatenate([np.full(len(fine), h * h), np.full(len(coarse), hc * hc)])
    return EvaluationGrid(x0, R, h, hc, nc_half * hc, (nf, nf), pts, wts)


@dataclass(frozen=True)
class DecayEnvelope:
    """``phi(x) = sqrt(R_t / |x - x0|) exp(-kappa (|x - x0| - R_t))`` outside ``B_{R_t}``."""
    R_tilde: float
    x0: np.ndarray
    kappa: float

    def phi(self, points) -> np.ndarray:
        r = np.hypot(*(np.atleast_2d(points) - self.x0).T)
        return np.sqrt(self.R_tilde / r) * np.exp(-self.kappa * (r - self.R_tilde))

    def tail_mass(self, radius: float) -> float:
        """``int_{|x - x0| > radius} phi^2 dx``."""
        k, rt = self.kappa, self.R_tilde
        return math.pi * rt / k * math.exp(-2.0 * k * (radius - rt))


# --- trace identity ------------------------------------------------------------

@dataclass(frozen=True)
class TraceReport:
    max_defect: float        # max |alpha psi|_Gamma - w| / max |w|
    epsilon: float
    nodes_used: int


def trace_consistency(state: BoundState, interior: float = 1.0, eps: float | None = None) -> TraceReport:
    """Compare ``alpha psi`` on the curve with the density ``w``.

    The curve value is the two-sided average at normal offsets ``eps``,
    ``2 eps`` and ``3 eps``, extrapolated quadratically to zero offset; the
    plain average carries an ``O(alpha eps)`` bias from the jump of the
    normal derivative.  ``interior`` keeps the central fraction of an open arc.
    """
    curve = state.curve
    eps = 1e-4 * curve.L if eps is None else eps
    s = state.nodes
    if not curve.closed:
        lo, hi = 0.5 * (1 - interior) * curve.L, 0.5 * (1 + interior) * curve.L
        keep = (s >= lo) & (s <= hi)
    else:
        keep = np.ones(len(s), dtype=bool)
    fr = curve.frame(s[keep])
    offs = [eps, -eps, 2 * eps, -2 * eps, 3 * eps, -3 * eps]
    pts = np.vstack([fr.gamma + o * fr.normal for o in offs])
    f = evaluate(state, pts, normalization="raw", gradient=False).psi.reshape(6, -1)
    avg = 0.5 * (f[0::2] + f[1::2])
    limit = 3.0 * avg[0] - 3.0 * avg[1] + avg[2]
    w = state.density[keep]
    defect = np.max(np.abs(state.alpha * limit - w)) / np.max(np.abs(state.density))
    return TraceReport(float(defect), eps, int(keep.sum()))


# --- norms -------------------------------------------------------------------

class GridTooCoarse(ValueError):
    pass


@dataclass(frozen=True)
class NormReport:
    sup_norm: float              # 1 under sup normalization
    grid_max: float
    argmax: np.ndarray
    argmax_distance: float
    cell: float                  # grid cell diagonal
    argmax_on_curve: bool
    l2_grid: float
    l2_tail_bound: float
    l2_upper: float
    l2_boundary: float
    norm1_rhs: float
    norm1_slack: float
    norm1_holds: bool
    norm4_rhs: float | None = None
    norm4_holds: bool | None = None


def norm4_lower(kappa: float, R: float, alpha: float, c5: float, eta0: float) -> float:
    """``kappa R / ((c5 alpha + 1)^2 (kappa^2 + 1)) exp(-eta0 kappa R)``."""
    rho = kappa * R
    return math.exp(math.log(rho) - 2 * math.log(c5 * alpha + 1) - math.log(kappa ** 2 + 1) - eta0 * rho)


def sample_grid(state: BoundState, grid: EvaluationGrid, gradient: bool = False,
                model: DensityModel | None = None) -> FieldSample:
    if grid.spacing >= min(state.curve.L / 16, 1.0 / state.kappa):
        raise GridTooCoarse(f"grid spacing {grid.spacing:.3g} does not resolve the curve or 1/kappa")
    return evaluate(state, grid.points, normalization="sup", gradient=gradient, model=model)


def norm_report(state: BoundState, grid: EvaluationGrid, field: FieldSample | None = None,
                c5: float | None = None, eta0: float | None = None,
                R_tilde: float | None = None) -> NormReport:
    field = field if field is not None else sample_grid(state, grid)
    if field.normalization != "sup":
        raise ValueError("norm_report expects a sup-normalized field")
    psi = field.psi
    i = int(np.argmax(np.abs(psi)))
    cell = grid.spacing * math.sqrt(2.0) if i < grid.n_fine else grid.coarse_spacing * math.sqrt(2.0)
    l2_grid = math.sqrt(float(np.sum(psi ** 2 * grid.weights)))
    env = DecayEnvelope(grid.R + 1.0 if R_tilde is None else R_tilde, grid.x0, state.kappa)
    tail = env.tail_mass(grid.outer)
    l2_upper = math.sqrt(l2_grid ** 2 + tail)
    l2_b = l2_norm_boundary(state) * field.scale
    curve = state.curve
    rhs1 = curve.L * state.alpha / (2 ** 1.5 * math.pi * state.kappa)
    out = dict(sup_norm=1.0, grid_max=float(abs(psi[i])), argmax=grid.points[i].copy(),
               argmax_distance=float(field.distance[i]), cell=cell,
               argmax_on_curve=bool(field.distance[i] <= cell), l2_grid=l2_grid,
               l2_tail_bound=math.sqrt(tail), l2_upper=l2_upper, l2_boundary=l2_b,
               norm1_rhs=rhs1, norm1_slack=rhs1 / l2_upper, norm1_holds=rhs1 > l2_upper)
    if c5 is not None and eta0 is not None:
        rhs4 = norm4_lower(state.kappa, grid.R, state.alpha, c5, eta0)
        out.update(norm4_rhs=rhs4, norm4_holds=l2_grid >= rhs4)
    return NormReport(**out)


# --- pointwise lemmas ----------------------------------------------------------

@dataclass(frozen=True)
class LemmaReport:
    ground_min: float | None
    ground_floor: float | None
    floor_holds: bool | None
    decay_R_tilde: float
    decay_samples: int
    decay_violations: int
    extrema_distances: np.ndarray
    extrema_on_curve: bool
    sign_change: bool | None
    zero_in_hull: bool | None
    zero_point: np.ndarray | None


def _local_extrema(psi_fine: np.ndarray) -> np.ndarray:
    """Flat indices of strict local maxima of ``psi > 0`` and minima of ``psi < 0``."""
    a = psi_fine
    core = a[1:-1, 1:-1]
    is_max = np.ones_like(core, dtype=bool)
    is_min = np.ones_like(core, dtype=bool)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            nb = a[1 + dx:a.shape[0] - 1 + dx, 1 + dy:a.shape[1] - 1 + dy]
            is_max &= core > nb
            is_min &= core < nb
    mask = (is_max & (core > 0)) | (is_min & (core < 0))
    ii, jj = np.nonzero(mask)
    return (ii + 1) * a.shape[1] + (jj + 1)


def _hull_samples(state: BoundState, grid: EvaluationGrid, field: FieldSample):
    """Points of the convex hull of the curve with their field values."""
    model = DensityModel(state)
    s, w = model.fine_density(4)
    pts = state.curve.points(s)
    vals = w / state.alpha * field.scale
    try:
        tri = Delaunay(ConvexHull(pts).points)
        inside = tri.find_simplex(grid.points) >= 0
        pts = np.vstack([pts, grid.points[inside]])
        vals = np.concatenate([vals, field.psi[inside]])
    except QhullError:
        pass  # flat hull: the curve is a straight segment
    return pts, vals


def lemma_diagnostics(state: BoundState, grid: EvaluationGrid, field: FieldSample | None = None,
                      C1: float | None = None, l2_norm: float | None = None,
                      R_tilde: float | None = None, tol: float = 1e-6) -> LemmaReport:
    """Positivity floor, decay envelope, extrema location and nodal structure."""
    field = field if field is not None else sample_grid(state, grid)
    psi = field.psi
    ground = state.index == 0
    gmin = gfloor = fholds = None
    if ground:
        gmin = float(np.min(psi[grid.in_ball]))
        if C1 is not None:
            norm = l2_norm if l2_norm is not None else norm_report(state, grid, field).l2_upper
            rho = state.kappa * grid.R
            gfloor = C1 * state.kappa * math.exp(-2 * rho) / (1 + math.sqrt(2 * rho)) * norm
            fholds = gmin > 0 and gmin >= gfloor
    rt = grid.R + 1.0 if R_tilde is None else R_tilde
    env = DecayEnvelope(rt, grid.x0, state.kappa)
    far = grid.radius > rt
    viol = int(np.sum(np.abs(psi[far]) > env.phi(grid.points[far]) + tol))
    fine = psi[:grid.n_fine].reshape(grid.fine_shape)
    ext = _local_extrema(fine)
    dist = field.distance[:grid.n_fine][ext]
    on_curve = bool(np.all(dist <= grid.spacing * math.sqrt(2.0)))
    sign = zero_in = zpt = None
    if not ground:
        sign = bool(psi.min() < 0 < psi.max())
        hp, hv = _hull_samples(state, grid, field)
        if hv.min() < 0 < hv.max():
            a, b = hp[int(np.argmax(hv))], hp[int(np.argmin(hv))]
            fa = hv.max()
            for _ in range(50):
                mid = 0.5 * (a + b)
                fm = evaluate(state, mid[None], gradient=False).psi[0]
                if fm == 0.0:
                    a = b = mid
                    break
                if (fm > 0) == (fa > 0):
                    a = mid
                else:
                    b = mid
            zero_in, zpt = True, 0.5 * (a + b)
        else:
            zero_in = False
    return LemmaReport(gmin, gfloor, fholds, rt, int(far.sum()), viol, dist, on_curve, sign, zero_in, zpt)


def pde_residual(grid: EvaluationGrid, field: FieldSample, energy: float, margin: int = 5) -> float:
    """Max of ``|(-Lap - E) psi|`` by the 5-point stencil, relative to ``max |E psi|``.

    Uses fine-grid points farther than ``margin`` cells from the curve.
    """
    h = grid.spacing
    a = field.psi[:grid.n_fine].reshape(grid.fine_shape)
    d = field.distance[:grid.n_fine].reshape(grid.fine_shape)[1:-1, 1:-1]
    lap = (a[2:, 1:-1] + a[:-2, 1:-1] + a[1:-1, 2:] + a[1:-1, :-2] - 4 * a[1:-1, 1:-1]) / h ** 2
    res = -lap - energy * a[1:-1, 1:-1]
    keep = d > margin * h
    return float(np.max(np.abs(res[keep])) / np.max(np.abs(energy * a[1:-1, 1:-1][keep])))


def export_field_csv(field: FieldSample, path) -> None:
    """Write ``x,y,psi,gradx,grady`` rows (gradients empty when not sampled)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "psi", "gradx", "grady"])
        g = field.grad_psi
        for i, (x, y) in enumerate(field.points):
            gx, gy = ("", "") if g is None else (repr(float(g[i, 0])), repr(float(g[i, 1])))
            wr.writerow([repr(float(x)), repr(float(y)), repr(float(field.psi[i])), gx, gy])
