"""Shared numerical kernels.

Dense symmetric eigensolver (cyclic Jacobi), bracketing root finder,
quadrature rules with logarithmic-singularity weights and adaptive 1D
integration.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import fft, integrate, optimize


class NumericsError(RuntimeError):
    pass


@dataclass(frozen=True)
class SymmetricEigenResult:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, orthonormal
    sweeps: int = 0


def symmetric_eigen(matrix, max_sweeps: int = 100) -> SymmetricEigenResult:
    """Full spectrum of a real symmetric matrix by cyclic Jacobi rotations.

    Rotations use Rutishauser's stable angle formulas.  Iteration stops once
    the off-diagonal Frobenius norm drops below ``1e-14 * ||A||_F``.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if a.size and np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= 1e-14 * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise NumericsError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return SymmetricEigenResult(w[order], v[:, order], sweeps)


def bracket_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10) -> float:
    """Root of ``f`` in ``[lo, hi]`` (Brent's method with bisection safeguard).

    ``tol`` is a relative tolerance on the abscissa.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise NumericsError(f"no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")
    rtol = max(tol, 4.0 * np.finfo(float).eps)
    return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=rtol, maxiter=500)


def adaptive_integrate(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
                       max_depth: int = 50) -> float:
    """Adaptive Gauss-Kronrod integration with an absolute error target.

    Endpoint singularities are fine as long as the integrand is never
    evaluated at the endpoints themselves (Kronrod nodes are interior).
    """
    limit = 2 * max_depth * 10
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(f, a, b, epsabs=tol, epsrel=0.0, limit=limit)
        except integrate.IntegrationWarning as exc:
            raise NumericsError(f"adaptive_integrate did not converge: {exc}") from exc
    if not err <= max(tol, 1e-15 * abs(value)):
        raise NumericsError(f"adaptive_integrate error estimate {err:.3e} exceeds tol {tol:.3e}")
    return float(value)


@dataclass(frozen=True)
class PeriodicLogQuadrature:
    """Weights on ``t_j = 2 pi j / n`` for a(t) ln(4 sin^2((s-t)/2)) + b(t).

    ``trapezoid`` is the uniform weight ``2 pi / n``; ``log_weights[k]`` is the
    weight multiplying ``a(t_j)`` when ``(i - j) mod n == k`` for the target
    ``s = t_i``.
    """

    n: int
    nodes: np.ndarray
    trapezoid: float
    log_weights: np.ndarray

    def matrix(self) -> np.ndarray:
        idx = (np.arange(self.n)[:, None] - np.arange(self.n)[None, :]) % self.n
        return self.log_weights[idx]

    def integrate(self, a_vals: np.ndarray, b_vals: np.ndarray, target: int = 0) -> float:
        idx = (target - np.arange(self.n)) % self.n
        return float(self.log_weights[idx] @ a_vals + self.trapezoid * np.sum(b_vals))


@lru_cache(maxsize=16)
def periodic_log_quadrature(n: int) -> PeriodicLogQuadrature:
    """Kress/Martensen-Kussmaul weights, exact for trigonometric degree < n/2."""
    if n % 2 or n < 16:
        raise ValueError("periodic_log_quadrature needs an even n >= 16")
    t = 2.0 * np.pi * np.arange(n) / n
    m = np.arange(1, n // 2)
    r = -(4.0 * np.pi / n) * (np.cos(np.outer(t, m)) / m).sum(axis=1)
    r -= (4.0 * np.pi / n ** 2) * np.cos(0.5 * n * t)
    r.setflags(write=False)
    t.setflags(write=False)
    return PeriodicLogQuadrature(n=n, nodes=t, trapezoid=2.0 * np.pi / n, log_weights=r)


def _cheb_integrals(p: np.ndarray) -> np.ndarray:
    # int_{-1}^{1} T_p(x) dx
    p = np.asarray(p)
    out = np.zeros(p.shape)
    even = p % 2 == 0
    out[even] = 2.0 / (1.0 - p[even].astype(float) ** 2)
    return out


def fejer_weights(n: int) -> np.ndarray:
    """Fejer first-rule weights on ``x_j = -cos((j + 1/2) pi / n)``, j = 0..n-1."""
    k = np.arange(n)
    c = np.zeros(n)
    even = k % 2 == 0
    c[even] = 2.0 / (1.0 - k[even].astype(float) ** 2)
    # w_j = (1/n) [c_0 + 2 sum_k c_k cos(k u_j)], a DCT-III; nodes symmetric under reversal
    return fft.dct(c, type=3) / n


@dataclass(frozen=True)
class ChebyshevLogQuadrature:
    """Product rules on Chebyshev points ``x_j = -cos((j - 1/2) pi / n)``.

    ``weights`` is Fejer's first rule for the integral over ``[-1, 1]``;
    ``log_weights[i, j]`` integrates ``ln|x_i - x| g(x)`` exactly for
    polynomial ``g`` of degree < n.
    """

    n: int
    angles: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray


@lru_cache(maxsize=8)
def chebyshev_log_quadrature(n: int, min_terms: int = 16384) -> ChebyshevLogQuadrature:
    """Nodes, Fejer weights and log-product weights on ``[-1, 1]``.

    The log moments come from the cosine series of ``ln|cos a - cos b|``,
    truncated after ``max(min_terms, 32 n)`` terms (error ~1e-12).
    """
    if n < 8:
        raise ValueError("chebyshev_log_quadrature needs n >= 8")
    u = (np.arange(1, n + 1) - 0.5) * np.pi / n
    x = -np.cos(u)
    k = np.arange(n)
    # interpolation: g(x) = sum_k b_k T_k(x), b = B @ g
    # T_k(x_j) = T_k(-cos u_j) = (-1)^k cos(k u_j)
    tk = ((-1.0) ** k)[:, None] * np.cos(np.outer(k, u))
    b = (2.0 / n) * tk
    b[0] *= 0.5
    fejer = _cheb_integrals(k) @ b
    # moments mom[i, k] = int ln|x_i - x| T_k(x) dx; with x_i = cos(a_i), a_i = pi - u_i
    big_m = max(min_terms, 32 * n)
    a = np.pi - u
    acc = np.zeros((n, n))
    chunk = 4096
    for start in range(1, big_m + 1, chunk):
        m = np.arange(start, min(start + chunk, big_m + 1))
        c = np.cos(np.outer(a, m)) / m
        g = 0.5 * (_cheb_integrals(m[:, None] - k[None, :]) + _cheb_integrals(m[:, None] + k[None, :]))
        acc += c @ g
    mom = -math.log(2.0) * _cheb_integrals(k)[None, :] - 2.0 * acc
    logw = mom @ b
    for arr in (u, x, fejer, logw):
        arr.setflags(write=False)
    return ChebyshevLogQuadrature(n=n, angles=u, nodes=x, weights=fejer, log_weights=logw)
