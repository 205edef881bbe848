"""Aubry duality as a numerical residual check.

An eigenvector psi of W_{lambda1, lambda2, phi, theta} is mapped to
    phi_n = e^{2 pi i n theta} B (psi_hat^+(xi + n phi), psi_hat^-(xi + n phi)),
B = [[a, b], [b, -a]], which should solve the transposed dual walk
W^T_{lambda2, lambda1, phi, xi} phi = z phi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gecmv import StateVector, apply_walk, apply_walk_transpose, walk_operator
from .model import WalkParameters


def mixing_matrix(t: float) -> np.ndarray:
    s = math.sqrt(1.0 + t * t)
    return np.array([[1.0 / s, t / s], [t / s, -1.0 / s]])


def fourier_sum(psi: StateVector, x, weights=None) -> np.ndarray:
    """psi_hat(x) = sum_n w_n psi_n e^{2 pi i n x}, shape (len(x), 2)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = psi.sites
    amps = psi.amps if weights is None else psi.amps * np.asarray(weights)[:, None]
    # reduce n*x mod 1 before exponentiating
    ph = np.exp(2j * np.pi * np.mod(np.outer(x, n), 1.0))
    return ph @ amps


def dual_transform(psi: StateVector, p: WalkParameters, xi: float, sites=None, weights=None) -> StateVector:
    """Dual state on ``sites`` (default: the sites of psi)."""
    sites = psi.sites if sites is None else np.arange(sites[0], sites[1] + 1)
    x = xi + sites * p.phi
    chk = fourier_sum(psi, np.mod(x, 1.0), weights)
    B = mixing_matrix(p.t)
    phase = np.exp(2j * np.pi * np.mod(sites * p.theta, 1.0))
    return StateVector(int(sites[0]), phase[:, None] * (chk @ B.T))


def dual_parameters(p: WalkParameters, xi: float) -> WalkParameters:
    return p.dual().with_(theta=xi)


def hann_weights(n: int) -> np.ndarray:
    """Smooth averaging weights summing to 1."""
    w = np.sin(np.pi * (np.arange(n) + 0.5) / n) ** 2
    return w / w.sum()


def xi_grid(n: int = 32, phi: float | None = None, avoid: float = 1e-3, m_max: int = 16) -> np.ndarray:
    """Equispaced xi values nudged away from exact resonances 2 xi + m phi in Z (|m| <= m_max)."""
    xs = np.arange(n) / n + 0.5 / n
    if phi is None:
        return xs
    out = []
    for x in xs:
        for _ in range(50):
            m = np.arange(-m_max, m_max + 1)
            d = np.abs(np.sin(np.pi * (2 * x + m * phi)))
            if d.min() >= avoid:
                break
            x = (x + 0.37 * avoid) % 1.0
        out.append(x)
    return np.array(out)


@dataclass
class DualityReport:
    residuals: np.ndarray  # (n_eigpairs, n_xi)
    source_residuals: np.ndarray
    eigenvalues: np.ndarray
    xis: np.ndarray
    interior_mass: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def median(self) -> float:
        return float(np.median(self.residuals))

    @property
    def max(self) -> float:
        return float(np.max(self.residuals))


def select_eigenpairs(p: WalkParameters, n_sites: int, n_eigpairs: int):
    """Closed-truncation eigenpairs on sites [-n_sites/2, n_sites/2 - 1], preferring central states."""
    n0 = -(n_sites // 2)
    n1 = n0 + n_sites - 1
    op = walk_operator(p, (n0, n1))
    w, V = np.linalg.eig(op.dense())
    mass = np.abs(V) ** 2
    mass /= mass.sum(axis=0)
    N = V.shape[0]
    q = N // 4
    central = mass[q:N - q].sum(axis=0)
    cand = np.argsort(-central)[:max(4 * n_eigpairs, n_eigpairs)]
    # spread the chosen states over the spectrum
    cand = cand[np.argsort(np.mod(np.angle(w[cand]), 2 * np.pi))]
    pick = cand[np.linspace(0, cand.size - 1, n_eigpairs).round().astype(int)]
    states = [StateVector(n0, V[:, i].reshape(-1, 2)) for i in pick]
    return w[pick], states, (n0, n1)


def duality_residual(p: WalkParameters, truncation_size: int = 1024, n_eigpairs: int = 8, xis=None) -> DualityReport:
    """Relative residual of the transposed dual equation on the interior half-window.

    ``truncation_size`` counts CMV indices (two per walk site).
    """
    n_sites = truncation_size // 2
    zs, states, (n0, n1) = select_eigenpairs(p, n_sites, n_eigpairs)
    xis = xi_grid(32, p.phi) if xis is None else np.asarray(xis, dtype=float)
    q = (n1 - n0 + 1) // 4
    lo, hi = n0 + q, n1 - q
    res = np.empty((len(states), xis.size))
    src = np.empty(len(states))
    imass = np.empty((len(states), xis.size))
    flags = []
    for i, (z, psi) in enumerate(zip(zs, states)):
        wpsi = apply_walk(p, psi)
        inner = wpsi.amps[1:-1]
        r = inner - z * psi.amps
        src[i] = np.linalg.norm(r[2:-2]) / np.linalg.norm(psi.amps)
        for k, xi in enumerate(xis):
            phi_state = dual_transform(psi, p, xi, sites=(n0, n1))
            dp = dual_parameters(p, xi)
            wt = apply_walk_transpose(dp, phi_state, lam=dp.lambda1)
            out = wt.amps[1:-1] - z * phi_state.amps
            s = slice(lo - n0, hi - n0 + 1)
            num = np.linalg.norm(out[s])
            den = np.linalg.norm(phi_state.amps[s])
            res[i, k] = num / den
            imass[i, k] = den ** 2 / np.linalg.norm(phi_state.amps) ** 2
            if imass[i, k] < 0.1:
                flags.append(f"eigpair {i}, xi {xi:.4f}: interior mass {imass[i, k]:.3f}")
    return DualityReport(res, src, zs, xis, imass, flags)


def double_transform(psi: StateVector, p: WalkParameters, xi: float, half_width: int) -> StateVector:
    """Transform with xi, then transform back with the roles of the phases exchanged.

    The second sum runs over a long window with smooth weights; the result is
    the reflected state n -> -n of psi.
    """
    first = dual_transform(psi, p, xi, sites=(-half_width, half_width))
    w = hann_weights(2 * half_width + 1)
    back = p.dual().with_(theta=xi)
    return dual_transform(first, back, -p.theta, sites=(-psi.n1, -psi.n0), weights=w)


def parseval_defect(psi: StateVector, p: WalkParameters, n: int = 0, n_xi: int | None = None) -> float:
    """| mean over an equispaced xi grid of |phi_n^xi|^2  -  ||psi||^2 |.

    Exact (up to rounding) once the grid is finer than the support of psi.
    """
    n_xi = 2 * len(psi.amps) + 1 if n_xi is None else n_xi
    xs = np.arange(n_xi) / n_xi
    vals = [np.sum(np.abs(dual_transform(psi, p, x, sites=(n, n)).amps) ** 2) for x in xs]
    return float(abs(np.mean(vals) - np.sum(np.abs(psi.amps) ** 2)))
