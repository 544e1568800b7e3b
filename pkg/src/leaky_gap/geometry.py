"""Finite planar C^2 curves in arc-length parameterization.

A :class:`Curve` stores tables on a uniform arc-length grid and keeps an
exact evaluator, so quadrature code can sample gamma at arbitrary ``s``.
Closed curves are tabulated on ``[0, L)``; open curves on ``[0, L]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

KINDS = ("circle", "segment", "arc", "ellipse", "fourier", "samples")
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
MAX_COS_THETA = math.sqrt(3.0) / 2.0
SEAM_TOL = 1e-8


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class CurveSpec:
    kind: str
    params: dict
    closed: bool

    def __post_init__(self):
        _validate_spec(self)

    @classmethod
    def from_json(cls, obj: dict) -> "CurveSpec":
        extra = set(obj) - {"kind", "params", "closed"}
        if extra:
            raise GeometryError(f"unknown curve key(s): {sorted(extra)}")
        try:
            return cls(kind=obj["kind"], params=dict(obj["params"]), closed=bool(obj["closed"]))
        except KeyError as exc:
            raise GeometryError(f"curve spec missing key {exc}") from None

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params, "closed": self.closed}

    @staticmethod
    def circle(radius: float = 1.0, center: Sequence[float] = (0.0, 0.0)) -> "CurveSpec":
        return CurveSpec("circle", {"radius": radius, "center": list(center)}, True)

    @staticmethod
    def segment(start: Sequence[float], end: Sequence[float]) -> "CurveSpec":
        return CurveSpec("segment", {"start": list(start), "end": list(end)}, False)

    @staticmethod
    def arc(radius: float, theta0: float, theta1: float,
            center: Sequence[float] = (0.0, 0.0)) -> "CurveSpec":
        return CurveSpec("arc", {"radius": radius, "center": list(center),
                                 "theta0": theta0, "theta1": theta1}, False)

    @staticmethod
    def ellipse(a: float, b: float, center: Sequence[float] = (0.0, 0.0),
                angle: float = 0.0) -> "CurveSpec":
        return CurveSpec("ellipse", {"a": a, "b": b, "center": list(center), "angle": angle}, True)


_REQUIRED = {
    "circle": ({"radius"}, {"center"}),
    "segment": ({"start", "end"}, set()),
    "arc": ({"radius", "theta0", "theta1"}, {"center"}),
    "ellipse": ({"a", "b"}, {"center", "angle"}),
    "fourier": ({"x", "y"}, set()),
    "samples": ({"points"}, set()),
}


def _point(v, name) -> np.ndarray:
    p = np.asarray(v, dtype=float)
    if p.shape != (2,) or not np.all(np.isfinite(p)):
        raise GeometryError(f"{name} must be a finite 2-vector")
    return p


def _validate_spec(spec: CurveSpec) -> None:
    if spec.kind not in KINDS:
        raise GeometryError(f"unknown curve kind {spec.kind!r}")
    req, opt = _REQUIRED[spec.kind]
    keys = set(spec.params)
    if not req <= keys:
        raise GeometryError(f"{spec.kind}: missing params {sorted(req - keys)}")
    if keys - req - opt:
        raise GeometryError(f"{spec.kind}: unknown params {sorted(keys - req - opt)}")
    p = spec.params
    if spec.kind in ("circle", "ellipse", "fourier") and not spec.closed:
        raise GeometryError(f"{spec.kind} curves are closed")
    if spec.kind in ("segment", "arc") and spec.closed:
        raise GeometryError(f"{spec.kind} curves are open")
    if "center" in p:
        _point(p["center"], "center")
    if spec.kind in ("circle", "arc") and not float(p["radius"]) > 0:
        raise GeometryError("radius must be positive")
    if spec.kind == "segment":
        if np.allclose(_point(p["start"], "start"), _point(p["end"], "end"), rtol=0, atol=1e-14):
            raise GeometryError("segment endpoints coincide")
    if spec.kind == "arc":
        span = abs(float(p["theta1"]) - float(p["theta0"]))
        if not 0 < span < 2 * math.pi:
            raise GeometryError("arc angle span must lie in (0, 2 pi)")
    if spec.kind == "ellipse" and not (float(p["a"]) > 0 and float(p["b"]) > 0):
        raise GeometryError("ellipse semi-axes must be positive")
    if spec.kind == "fourier":
        for c in ("x", "y"):
            arr = np.asarray(p[c], dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
                raise GeometryError(f"fourier {c}: expected list of [cos, sin] pairs, order 0..K, K>=1")
    if spec.kind == "samples":
        pts = np.asarray(p["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
            raise GeometryError("samples: need at least 4 points of shape (n, 2)")
        if spec.closed and np.allclose(pts[0], pts[-1], rtol=0, atol=1e-14):
            pts = pts[:-1]
        d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
        np.fill_diagonal(d, np.inf)
        if d.min() <= 0:
            i, j = np.unravel_index(np.argmin(d), d.shape)
            raise GeometryError(f"samples: points {i} and {j} coincide")


# --- parametric representations: t in [0, T], returning (g, g', g'') --------

@dataclass(frozen=True)
class _Param:
    period: float
    func: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]
    unit_speed_scale: float | None = None  # set when |g'| is constant


def _param_from_spec(spec: CurveSpec) -> _Param:
    p = spec.params
    k = spec.kind
    if k in ("circle", "arc"):
        r = float(p["radius"])
        c = _point(p.get("center", (0.0, 0.0)), "center")
        th0 = 0.0 if k == "circle" else float(p["theta0"])
        span = 2 * math.pi if k == "circle" else float(p["theta1"]) - th0

        def f(t):
            th = th0 + span * t
            cs, sn = np.cos(th), np.sin(th)
            g = np.stack([c[0] + r * cs, c[1] + r * sn], -1)
            d1 = span * r * np.stack([-sn, cs], -1)
            d2 = -span ** 2 * r * np.stack([cs, sn], -1)
            return g, d1, d2
        return _Param(1.0, f, abs(span) * r)
    if k == "segment":
        a, b = _point(p["start"], "start"), _point(p["end"], "end")

        def f(t):
            t = np.asarray(t, dtype=float)[..., None]
            return a + t * (b - a), np.broadcast_to(b - a, t.shape[:-1] + (2,)), np.zeros(t.shape[:-1] + (2,))
        return _Param(1.0, f, float(np.hypot(*(b - a))))
    if k == "ellipse":
        a, b = float(p["a"]), float(p["b"])
        c = _point(p.get("center", (0.0, 0.0)), "center")
        ang = float(p.get("angle", 0.0))
        rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])

        def f(t):
            cs, sn = np.cos(t), np.sin(t)
            g = np.stack([a * cs, b * sn], -1) @ rot.T + c
            d1 = np.stack([-a * sn, b * cs], -1) @ rot.T
            d2 = np.stack([-a * cs, -b * sn], -1) @ rot.T
            return g, d1, d2
        return _Param(2 * math.pi, f)
    if k == "fourier":
        cx = np.asarray(p["x"], dtype=float)
        cy = np.asarray(p["y"], dtype=float)

        def series(coef, t):
            m = np.arange(coef.shape[0])
            ph = np.multiply.outer(t, m)
            cs, sn = np.cos(ph), np.sin(ph)
            v = cs @ coef[:, 0] + sn @ coef[:, 1]
            d1 = (-sn * m) @ coef[:, 0] + (cs * m) @ coef[:, 1]
            d2 = -(cs * m ** 2) @ coef[:, 0] - (sn * m ** 2) @ coef[:, 1]
            return v, d1, d2

        def f(t):
            t = np.asarray(t, dtype=float)
            x = series(cx, t)
            y = series(cy, t)
            return tuple(np.stack([x[i], y[i]], -1) for i in range(3))
        return _Param(2 * math.pi, f)
    # samples: cubic spline in cumulative chord length
    pts = np.asarray(p["points"], dtype=float)
    if spec.closed:
        if np.allclose(pts[0], pts[-1], rtol=0, atol=1e-14):
            pts = pts[:-1]
        pts = np.vstack([pts, pts[:1]])
    tk = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    spl = CubicSpline(tk, pts, bc_type="periodic" if spec.closed else "not-a-knot")
    d1s, d2s = spl.derivative(1), spl.derivative(2)

    def f(t):
        return spl(t), d1s(t), d2s(t)
    return _Param(float(tk[-1]), f)


class _ArcLength:
    """s(t) by composite 16-point Gauss-Legendre; t(s) by safeguarded Newton."""

    def __init__(self, par: _Param, panels: int = 256):
        self.par = par
        self.edges = np.linspace(0.0, par.period, panels + 1)
        h = np.diff(self.edges)
        mid = 0.5 * (self.edges[:-1] + self.edges[1:])
        tq = mid[:, None] + 0.5 * h[:, None] * _GL_X[None, :]
        sp = self.speed(tq)
        self.cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (sp @ _GL_W))])
        self.length = float(self.cum[-1])

    def speed(self, t):
        return np.hypot(*np.moveaxis(self.par.func(t)[1], -1, 0))

    def s_of_t(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.edges) - 2)
        a = self.edges[i]
        half = 0.5 * (t - a)
        tq = (a + half)[..., None] + half[..., None] * _GL_X
        return self.cum[i] + half * (self.speed(tq) @ _GL_W)

    def t_of_s(self, s):
        s = np.asarray(s, dtype=float)
        # initial guess: linear interpolation of the panel table
        t = np.interp(s, self.cum, self.edges)
        for _ in range(30):
            r = self.s_of_t(t) - s
            step = r / self.speed(t)
            t = np.clip(t - step, 0.0, self.par.period)
            if np.max(np.abs(step), initial=0.0) < 1e-15 * self.par.period:
                break
        return t


@dataclass(frozen=True)
class CurveFrame:
    """Pointwise data at arc-length positions."""
    s: np.ndarray
    gamma: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    kappa: np.ndarray


@dataclass(frozen=True, eq=False)
class Curve:
    n_samples: int
    s: np.ndarray
    gamma: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    kappa: np.ndarray
    L: float
    closed: bool
    spec: CurveSpec | None = None
    _evaluator: Any = field(default=None, repr=False, compare=False)

    @property
    def h(self) -> float:
        return self.L / self.n_samples if self.closed else self.L / (self.n_samples - 1)

    def frame(self, s) -> CurveFrame:
        """Exact evaluation at arbitrary arc-length positions."""
        s = np.asarray(s, dtype=float)
        if self.closed:
            s = np.mod(s, self.L)
        elif np.any((s < -1e-12 * self.L) | (s > self.L * (1 + 1e-12))):
            raise GeometryError("arc-length position outside [0, L]")
        return self._evaluator(s)

    def points(self, s) -> np.ndarray:
        return self.frame(s).gamma


def _make_evaluator(par: _Param):
    if par.unit_speed_scale is not None:
        length = par.unit_speed_scale
        to_t = lambda s: s / length * par.period  # noqa: E731
    else:
        al = _ArcLength(par)
        length = al.length
        to_t = al.t_of_s

    def evaluate(s):
        t = to_t(s)
        g, d1, d2 = par.func(t)
        sp = np.hypot(d1[..., 0], d1[..., 1])
        tan = d1 / sp[..., None]
        nor = np.stack([-tan[..., 1], tan[..., 0]], -1)
        kap = (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / sp ** 3
        return CurveFrame(np.asarray(s, dtype=float), g, tan, nor, kap)
    return length, evaluate


def _segments_intersect(p: np.ndarray, closed: bool):
    """First pair of non-adjacent polyline edges that intersect, else None."""
    q = np.roll(p, -1, axis=0) if closed else p[1:]
    a = p if closed else p[:-1]
    m = a.shape[0]
    d = q - a

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    for i0 in range(0, m, 256):
        i = np.arange(i0, min(i0 + 256, m))
        ai, di = a[i][:, None], d[i][:, None]
        aj, dj = a[None], d[None]
        den = cross(di, dj)
        w = aj - ai
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = cross(w, dj) / den
            uu = cross(w, di) / den
        hit = (np.abs(den) > 0) & (tt >= 0) & (tt <= 1) & (uu >= 0) & (uu <= 1)
        jj = np.arange(m)[None]
        gap = np.abs(i[:, None] - jj)
        if closed:
            gap = np.minimum(gap, m - gap)
        hit &= gap > 1
        if hit.any():
            r, c = np.argwhere(hit)[0]
            return int(i[r]), int(c)
    return None


def build_curve(spec: CurveSpec, n_samples: int) -> Curve:
    """Arc-length tabulation of ``spec`` on ``n_samples`` uniform nodes."""
    if n_samples < 16:
        raise GeometryError("n_samples must be >= 16")
    par = _param_from_spec(spec)
    length, evaluate = _make_evaluator(par)
    if not length > 0:
        raise GeometryError("degenerate curve of zero length")
    s = np.linspace(0.0, length, n_samples, endpoint=not spec.closed)
    fr = evaluate(s)
    if spec.closed:
        a = par.func(np.array([0.0, par.period]))
        scale = max(1.0, float(np.max(np.abs(fr.gamma))))
        for k in range(3):
            if np.max(np.abs(a[k][0] - a[k][1])) > SEAM_TOL * scale * max(1.0, length) ** k:
                raise GeometryError(f"closed curve: derivative {k} does not match at the seam")
    hit = _segments_intersect(fr.gamma, spec.closed)
    if hit is not None:
        i, j = hit
        raise GeometryError(f"self-intersection between s={s[i]:.6g} and s={s[j]:.6g}")
    return Curve(n_samples=n_samples, s=s, gamma=fr.gamma, tangent=fr.tangent, normal=fr.normal,
                 kappa=fr.kappa, L=length, closed=spec.closed, spec=spec, _evaluator=evaluate)


# --- summary ----------------------------------------------------------------

def _circle_from(pts: list[np.ndarray]) -> tuple[np.ndarray, float]:
    if len(pts) == 0:
        return np.zeros(2), -1.0
    if len(pts) == 1:
        return pts[0].copy(), 0.0
    if len(pts) == 2:
        c = 0.5 * (pts[0] + pts[1])
        return c, float(np.hypot(*(pts[0] - c)))
    a, b, c = pts
    bx, by = b - a
    cx, cy = c - a
    d = 2.0 * (bx * cy - by * cx)
    if abs(d) < 1e-300:
        # collinear: widest pair
        best = max(((p, q) for p in pts for q in pts), key=lambda pq: np.hypot(*(pq[0] - pq[1])))
        return _circle_from(list(best))
    ux = (cy * (bx * bx + by * by) - by * (cx * cx + cy * cy)) / d
    uy = (bx * (cx * cx + cy * cy) - cx * (bx * bx + by * by)) / d
    center = a + np.array([ux, uy])
    return center, float(math.hypot(ux, uy))


def minimal_enclosing_disk(points: np.ndarray, seed: int = 0) -> tuple[np.ndarray, float]:
    """Smallest enclosing disk by Welzl's randomized incremental algorithm."""
    pts = np.asarray(points, dtype=float)
    pts = pts[np.random.default_rng(seed).permutation(len(pts))]
    eps = 1e-12

    def inside(c, r, p):
        return math.hypot(p[0] - c[0], p[1] - c[1]) <= r * (1 + eps) + eps

    c, r = _circle_from([])
    for i in range(len(pts)):
        if r >= 0 and inside(c, r, pts[i]):
            continue
        c, r = pts[i].copy(), 0.0
        for j in range(i):
            if inside(c, r, pts[j]):
                continue
            c, r = _circle_from([pts[i], pts[j]])
            for k in range(j):
                if not inside(c, r, pts[k]):
                    c, r = _circle_from([pts[i], pts[j], pts[k]])
    return c, r


@dataclass(frozen=True)
class GeometrySummary:
    L: float
    K: float
    diameter: float
    R: float
    x0: np.ndarray
    M_half: float
    M_full: float | None
    closed: bool

    @property
    def M(self) -> float:
        """Injectivity modulus used by the constant chain."""
        return self.M_half if self.closed else self.M_full


def _pair_distances(curve: Curve):
    s, g = curve.s, curve.gamma
    ds = np.abs(s[:, None] - s[None, :])
    if curve.closed:
        ds = np.minimum(ds, curve.L - ds)
    chord = np.hypot(g[:, None, 0] - g[None, :, 0], g[:, None, 1] - g[None, :, 1])
    return ds, chord


def injectivity_modulus(curve: Curve, m: float) -> float:
    """Largest M with ``M |s - s'| <= |gamma(s) - gamma(s')|`` for ``|s - s'| <= m``.

    On closed curves ``|s - s'|`` is the periodic arc distance.  This equals the
    minimum over the original and the half-period-shifted parameterization,
    since both see exactly the same pairs.
    """
    if curve.closed:
        if not 0 < m < curve.L:
            raise GeometryError("m must lie in (0, L) for closed curves")
    elif not 0 < m <= curve.L * (1 + 1e-12):
        raise GeometryError("m must lie in (0, L] for open curves")
    best = 1.0
    n = curve.n_samples
    for i0 in range(0, n, 512):
        sl = slice(i0, min(i0 + 512, n))
        ds = np.abs(curve.s[sl, None] - curve.s[None, :])
        if curve.closed:
            ds = np.minimum(ds, curve.L - ds)
        d = curve.gamma[sl, None, :] - curve.gamma[None, :, :]
        chord = np.hypot(d[..., 0], d[..., 1])
        ok = (ds > 0) & (ds <= m * (1 + 1e-12))
        if ok.any():
            best = min(best, float(np.min(chord[ok] / ds[ok])))
    return best


def geometry_summary(curve: Curve) -> GeometrySummary:
    g = curve.gamma
    diam = 0.0
    for i0 in range(0, len(g), 512):
        d = g[i0:i0 + 512, None, :] - g[None, :, :]
        diam = max(diam, float(np.max(np.hypot(d[..., 0], d[..., 1]))))
    x0, r = minimal_enclosing_disk(g)
    if curve.closed:
        m_half = injectivity_modulus(curve, curve.L / 2)
        m_full = None
    else:
        m_half = injectivity_modulus(curve, curve.L / 2)
        m_full = injectivity_modulus(curve, curve.L)
    return GeometrySummary(L=curve.L, K=float(np.max(np.abs(curve.kappa))), diameter=diam,
                           R=r + 1.0, x0=x0, M_half=m_half, M_full=m_full, closed=curve.closed)


# --- transversal probes -------------------------------------------------------

def tau_angle(theta: float) -> float:
    """Angle constant ``(1 - |cos theta|) / 2`` of the distance lower bound."""
    return 0.5 * (1.0 - abs(math.cos(theta)))


def delta0(theta: float, K: float, M: float, L: float) -> float:
    if K == 0:
        return L / 2
    return min(L / 2, M / (2 * K) * tau_angle(theta))


@dataclass(frozen=True)
class TransversalProbe:
    base_index: int
    base_point: np.ndarray
    direction: np.ndarray
    theta: float
    half_length: float
    requested_half_length: float
    clamped: bool
    delta0: float
    b1: float

    def points(self, n: int) -> np.ndarray:
        """``n`` equispaced points on the probe segment."""
        t = np.linspace(-self.half_length, self.half_length, n)
        return self.base_point + t[:, None] * self.direction


def chord_vector(curve: Curve, s: np.ndarray, s_y: float) -> np.ndarray:
    """Unit vectors ``(gamma(s) - gamma(s_y)) / |gamma(s) - gamma(s_y)|``."""
    d = curve.points(s) - curve.points(np.array([s_y]))[0]
    return d / np.hypot(d[:, 0], d[:, 1])[:, None]


def transversal_probe(curve: Curve, index: int, b: float, theta: float = math.pi / 2,
                      summary: GeometrySummary | None = None) -> TransversalProbe:
    """Segment through ``gamma(s_index)`` meeting the curve at angle ``theta``."""
    if not b > 0:
        raise GeometryError("probe half-length must be positive")
    if abs(math.cos(theta)) > MAX_COS_THETA + 1e-15:
        raise GeometryError("|cos theta| must not exceed sqrt(3)/2")
    summary = summary or geometry_summary(curve)
    t = curve.tangent[index]
    nrm = curve.normal[index]
    e = math.cos(theta) * t + math.sin(theta) * nrm
    d0 = delta0(theta, summary.K, summary.M, summary.L)
    b1 = summary.M * d0 / 2
    cap = min(1.0, b1)
    return TransversalProbe(base_index=index, base_point=curve.gamma[index].copy(), direction=e,
                            theta=theta, half_length=min(b, cap), requested_half_length=b,
                            clamped=b > cap, delta0=d0, b1=b1)
