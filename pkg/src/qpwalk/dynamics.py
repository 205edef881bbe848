"""Exact finite-window evolution and transport diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gecmv import StateVector
from .model import WalkParameters, coin_entries


class WindowTooSmallError(ValueError):
    pass


class Walker:
    """Repeated application of W = S Q on a fixed site window.

    Coins are sampled once; each step is a handful of vectorised operations.
    """

    def __init__(self, p: WalkParameters, n0: int, n1: int, lam: float | None = None):
        self.p = p
        self.n0, self.n1 = int(n0), int(n1)
        lam = p.lambda1 if lam is None else lam
        self.lam, self.lamp = lam, np.sqrt(1.0 - lam * lam)
        self.q = coin_entries(p, np.arange(self.n0, self.n1 + 1))

    def step(self, plus: np.ndarray, minus: np.ndarray):
        q11, q12, q21, q22 = self.q
        u = q11 * plus + q12 * minus
        d = q21 * plus + q22 * minus
        new_p = -self.lamp * d
        new_p[1:] += self.lam * u[:-1]
        new_m = self.lamp * u
        new_m[:-1] += self.lam * d[1:]
        return new_p, new_m


def _embed(initial: StateVector, n0: int, n1: int):
    if initial.n0 < n0 or initial.n1 > n1:
        raise WindowTooSmallError("initial state does not fit in the window")
    amps = np.zeros((n1 - n0 + 1, 2), dtype=complex)
    amps[initial.n0 - n0:initial.n1 - n0 + 1] = initial.amps
    return amps[:, 0].copy(), amps[:, 1].copy()


def _support(initial: StateVector):
    nz = np.nonzero(np.abs(initial.amps).sum(axis=1) > 0)[0]
    if nz.size == 0:
        return initial.n0, initial.n0
    return initial.n0 + nz[0], initial.n0 + nz[-1]


def evolve(p: WalkParameters, T: int, initial: StateVector, window: tuple | None = None) -> StateVector:
    """psi(T) = W^T psi(0) on a window that contains the light cone with margin 2."""
    if T < 0:
        raise ValueError("T must be >= 0")
    lo, hi = _support(initial)
    need = (lo - T - 2, hi + T + 2)
    if window is None:
        window = need
    n0, n1 = window
    if n0 > need[0] or n1 < need[1]:
        raise WindowTooSmallError(f"window {window} does not contain the light cone {need}")
    w = Walker(p, n0, n1)
    plus, minus = _embed(initial, n0, n1)
    for _ in range(T):
        plus, minus = w.step(plus, minus)
    return StateVector(n0, np.stack([plus, minus], axis=1))


def initial_state(kind: str = "plus", window=(0, 0)) -> StateVector:
    """delta_0^+ ("plus") or the spin-symmetric (delta_0^+ + i delta_0^-)/sqrt 2 ("symmetric")."""
    spinor = {"plus": (1.0, 0.0), "symmetric": (1 / np.sqrt(2), 1j / np.sqrt(2))}[kind]
    return StateVector.delta(window[0], window[1], 0, spinor)


@dataclass
class TransportRecord:
    times: np.ndarray
    second_moment: np.ndarray
    return_prob: np.ndarray
    fitted_exponent: float
    fit_residual: float
    norm_drift: float = 0.0
    outside_cone_mass: float = 0.0
    extra: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.times.tolist(), self.second_moment.tolist(), self.return_prob.tolist()))


def log_checkpoints(T_max: int, per_decade: int = 12) -> np.ndarray:
    n = max(2, int(np.ceil(per_decade * np.log10(T_max))) + 1)
    t = np.unique(np.round(np.logspace(0, np.log10(T_max), n)).astype(int))
    return t[t >= 1]


def fit_exponent(times, m2) -> tuple[float, float]:
    """Least-squares beta in log M2 = 2 beta log T + c over the last decade of checkpoints."""
    times = np.asarray(times, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    sel = (times >= times[-1] / 10.0) & (m2 > 0)
    if sel.sum() < 2:
        sel = m2 > 0
    x, y = np.log(times[sel]), np.log(m2[sel])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(res[0] / x.size)) if res.size else 0.0
    return float(coef[0] / 2.0), resid


def transport(p: WalkParameters, T_max: int, checkpoints=None, initial: str = "plus") -> TransportRecord:
    if T_max < 64:
        raise ValueError("T_max must be >= 64")
    checkpoints = log_checkpoints(T_max) if checkpoints is None else np.asarray(sorted(set(checkpoints)), int)
    n0, n1 = -T_max - 4, T_max + 4
    psi0 = initial_state(initial)
    w = Walker(p, n0, n1)
    plus, minus = _embed(psi0, n0, n1)
    p0, m0 = plus.copy(), minus.copy()
    sites = np.arange(n0, n1 + 1, dtype=float)
    cone = np.abs(sites)
    m2s, rps, drift, outside = [], [], 0.0, 0.0
    ck = set(int(c) for c in checkpoints if 1 <= c <= T_max)
    for T in range(1, T_max + 1):
        plus, minus = w.step(plus, minus)
        if T in ck:
            dens = np.abs(plus) ** 2 + np.abs(minus) ** 2
            m2s.append(float(np.sum(sites ** 2 * dens)))
            ov = np.vdot(p0, plus) + np.vdot(m0, minus)
            rps.append(float(abs(ov) ** 2))
            drift = max(drift, abs(dens.sum() - 1.0))
            outside = max(outside, float(dens[cone > T].sum()))
    times = np.array(sorted(ck), dtype=int)
    m2s = np.array(m2s)
    beta, resid = fit_exponent(times, m2s)
    return TransportRecord(times, m2s, np.array(rps), beta, resid, drift, outside)
