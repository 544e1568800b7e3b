"""Strong-coupling comparison operator ``-d^2/ds^2 - kappa(s)^2 / 4`` on ``[0, L]``.

Periodic problems are discretized by Fourier collocation; Dirichlet and
Neumann problems by second-order finite differences with Richardson
extrapolation.  Grids are doubled until the requested eigenvalues settle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .bs_operator import solve_bound_state
from .geometry import Curve

BCS = ("periodic", "dirichlet", "neumann")


class ComparisonError(ValueError):
    pass


@dataclass(frozen=True)
class ComparisonSpectrum:
    bc: str
    mu: np.ndarray          # ascending
    phi0: np.ndarray        # ground state on s_grid, positive, max = 1
    s_grid: np.ndarray
    a: float                # (max phi0 / min phi0)^2; inf when phi0 vanishes (Dirichlet)
    n_grid: int
    L: float

    @property
    def gap(self) -> float:
        return float(self.mu[1] - self.mu[0])


def _periodic(curve: Curve, n: int, m: int):
    s = np.arange(n) * (curve.L / n)
    v = -0.25 * curve.frame(s).kappa ** 2
    k = 2 * math.pi / curve.L * np.fft.fftfreq(n, 1.0 / n)
    # second-derivative collocation matrix via FFT of the identity
    d2 = np.real(np.fft.ifft(-(k ** 2)[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0))
    h = -0.5 * (d2 + d2.T) + np.diag(v)
    w, vec = np.linalg.eigh(h)
    return w[:m], vec[:, 0], s


def _fd(curve: Curve, n: int, m: int, bc: str):
    """Second-order FD on ``n`` cells; Neumann uses half-weight end masses."""
    h = curve.L / n
    if bc == "dirichlet":
        s = np.arange(1, n) * h
        v = -0.25 * curve.frame(s).kappa ** 2
        d = 2.0 / h ** 2 + v
        e = np.full(n - 2, -1.0 / h ** 2)
    else:
        s = np.arange(n + 1) * h
        v = -0.25 * curve.frame(s).kappa ** 2
        mass = np.ones(n + 1)
        mass[[0, -1]] = 0.5
        stiff = np.full(n + 1, 2.0 / h ** 2)
        stiff[[0, -1]] = 1.0 / h ** 2
        d = stiff / mass + v
        e = -1.0 / h ** 2 / np.sqrt(mass[:-1] * mass[1:])
    w, vec = eigh_tridiagonal(d, e, select="i", select_range=(0, m - 1))
    phi = vec[:, 0]
    if bc == "dirichlet":
        phi = np.concatenate([[0.0], phi, [0.0]])
        s = np.concatenate([[0.0], s, [curve.L]])
    else:
        phi = phi / np.sqrt(np.where(np.arange(n + 1) % n == 0, 0.5, 1.0))
    return w, phi, s


def _normalize(phi: np.ndarray) -> np.ndarray:
    phi = phi * np.sign(phi[np.argmax(np.abs(phi))])
    return phi / phi.max()


def _trig_refine(f: np.ndarray, factor: int) -> np.ndarray:
    n = len(f)
    c = np.fft.rfft(f)
    c[-1] *= 0.5
    out = np.zeros(n * factor // 2 + 1, dtype=complex)
    out[:len(c)] = c
    return np.fft.irfft(out, n * factor) * factor


def comparison_spectrum(curve: Curve, bc: str, m_modes: int = 4, n_grid: int = 64,
                        tol: float = 1e-9, max_grid: int = 1 << 16) -> ComparisonSpectrum:
    """Lowest ``m_modes`` comparison eigenvalues, converged by grid doubling."""
    if bc not in BCS:
        raise ComparisonError(f"unknown boundary condition {bc!r}")
    if curve.closed != (bc == "periodic"):
        raise ComparisonError("periodic conditions go with closed curves, dirichlet/neumann with open ones")
    n = max(16, n_grid + n_grid % 2)
    prev = None
    while True:
        if bc == "periodic":
            if n > 2048:
                raise ComparisonError("periodic comparison problem did not converge")
            mu, phi, s = _periodic(curve, n, m_modes)
        else:
            if 2 * n > max_grid:
                raise ComparisonError(f"{bc} comparison problem did not converge")
            m1, _, _ = _fd(curve, n, m_modes, bc)
            m2, phi, s = _fd(curve, 2 * n, m_modes, bc)
            mu = (4.0 * m2 - m1) / 3.0
        if prev is not None and np.max(np.abs(mu - prev)) < tol * max(1.0, np.max(np.abs(mu))):
            break
        prev = mu
        n *= 2
    phi = _normalize(phi)
    if bc == "periodic":
        fine = _trig_refine(phi, 16)
        a = (fine.max() / fine.min()) ** 2
    elif bc == "dirichlet":
        a = math.inf
    else:
        a = (phi.max() / phi.min()) ** 2
    return ComparisonSpectrum(bc, np.asarray(mu), phi, s, float(a), n, curve.L)


@dataclass(frozen=True)
class KSBounds:
    lower: float
    upper: float
    gap: float
    a: float

    @property
    def holds(self) -> bool:
        slack = 1e-9 * max(1.0, abs(self.gap))
        return self.lower - slack <= self.gap <= self.upper + slack


def ks_gap_bounds(spec: ComparisonSpectrum, L: float | None = None) -> KSBounds:
    """``(a^-1 (2 pi / L)^2, a (2 pi / L)^2)`` around the comparison gap."""
    if spec.bc != "periodic":
        raise ComparisonError("Kirsch-Simon bounds need the periodic comparison spectrum")
    L = spec.L if L is None else L
    base = (2 * math.pi / L) ** 2
    out = KSBounds(base / spec.a, base * spec.a, spec.gap, spec.a)
    if not out.holds:
        raise ComparisonError(f"comparison gap {out.gap} outside [{out.lower}, {out.upper}]")
    return out


@dataclass(frozen=True)
class ResidualRow:
    alpha: float
    energy: float
    mu: float            # periodic mu_j, or the Neumann value for arcs
    mu_upper: float      # equals mu for closed curves, Dirichlet value for arcs
    residual: float      # E_j + alpha^2/4 - mu
    scaled: float        # |residual| alpha / log(alpha)


@dataclass(frozen=True)
class ResidualTable:
    j: int
    rows: list
    monotone: bool       # |residual| non-increasing along the alpha list


def strong_coupling_residual(curve: Curve, alpha_list, j: int = 0, n: int = 256,
                             spectrum: ComparisonSpectrum | None = None,
                             upper: ComparisonSpectrum | None = None) -> ResidualTable:
    """``E_j(alpha) + alpha^2/4 - mu_j`` along ``alpha_list``.

    On arcs ``mu`` is the Neumann value and ``mu_upper`` the Dirichlet one.
    """
    alphas = [float(a) for a in alpha_list]
    if curve.closed:
        spectrum = spectrum or comparison_spectrum(curve, "periodic", m_modes=j + 1)
        upper = spectrum
    else:
        spectrum = spectrum or comparison_spectrum(curve, "neumann", m_modes=j + 1)
        upper = upper or comparison_spectrum(curve, "dirichlet", m_modes=j + 1)
    rows = []
    for a in alphas:
        st = solve_bound_state(curve, a, j, n)
        shifted = st.energy + a * a / 4
        r = shifted - spectrum.mu[j]
        rows.append(ResidualRow(a, st.energy, float(spectrum.mu[j]), float(upper.mu[j]), float(r),
                                abs(r) * a / math.log(a)))
    order = np.argsort(alphas)
    res = [abs(rows[i].residual) for i in order]
    mono = all(res[i + 1] <= res[i] for i in range(len(res) - 1))
    return ResidualTable(j, rows, mono)
