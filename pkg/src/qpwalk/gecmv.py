"""Banded (five-diagonal) CMV representation of the walk.

CMV index convention: walk label (n, +) sits at index 2n-1 and (n, -) at 2n,
so the coin at site n is the odd block Theta_{2n-1} and the walk operator is
literally E = L M with L = (+) Theta_{2n}, M = (+) Theta_{2n+1}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CoefficientSequence, WalkParameters, coin_entries, generate_coefficients

OPEN = None  # boundary marker: keep the original coefficient


class LightConeError(RuntimeError):
    pass


class SingularCoefficientError(RuntimeError):
    pass


# -- labels -------------------------------------------------------------------

def cmv_index(n, sign):
    """CMV index of walk label (n, sign), sign in {+1, -1}."""
    n = np.asarray(n)
    return np.where(np.asarray(sign) > 0, 2 * n - 1, 2 * n)


def walk_label(j):
    """Inverse of cmv_index: returns (n, sign)."""
    j = np.asarray(j)
    odd = (j % 2) != 0
    n = np.where(odd, (j + 1) // 2, j // 2)
    return n, np.where(odd, 1, -1)


@dataclass
class StateVector:
    """Walk state on sites n0..n0+len-1; amps[:, 0] is psi^+, amps[:, 1] is psi^-."""
    n0: int
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=complex).reshape(-1, 2)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.n0, self.n0 + len(self.amps))

    @property
    def n1(self) -> int:
        return self.n0 + len(self.amps) - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    @classmethod
    def delta(cls, n0: int, n1: int, site: int = 0, spinor=(1.0, 0.0)) -> "StateVector":
        amps = np.zeros((n1 - n0 + 1, 2), dtype=complex)
        amps[site - n0] = spinor
        return cls(n0, amps)

    def to_cmv(self) -> tuple[int, np.ndarray]:
        """Flatten to a CMV vector on [2 n0 - 1, 2 n1]."""
        return 2 * self.n0 - 1, self.amps.reshape(-1).copy()

    @classmethod
    def from_cmv(cls, a: int, v: np.ndarray) -> "StateVector":
        v = np.asarray(v, dtype=complex)
        b = a + len(v) - 1
        # pad to whole sites
        lo = a if a % 2 != 0 else a - 1
        hi = b if b % 2 == 0 else b + 1
        full = np.zeros(hi - lo + 1, dtype=complex)
        full[a - lo:a - lo + len(v)] = v
        return cls((lo + 1) // 2, full.reshape(-1, 2))


def theta_block(alpha, rho) -> np.ndarray:
    return np.array([[np.conj(alpha), rho], [np.conj(rho), -alpha]], dtype=complex)


def _check_beta(beta):
    if beta is OPEN:
        return
    if abs(abs(beta) - 1.0) > 1e-12:
        raise ValueError(f"closed boundary needs |beta| = 1, got |beta| = {abs(beta)}")


@dataclass
class BandedUnitary:
    """Window [a, b] of L M with boundary values replacing alpha_{a-1} and alpha_b.

    ``coeffs`` must cover [a-1, b].  A unit-modulus beta also zeroes the
    matching rho so the window decouples and the truncation is unitary.
    """
    a: int
    b: int
    coeffs: CoefficientSequence
    boundary: tuple = (1.0, 1.0)

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError(f"malformed window [{self.a}, {self.b}]")
        if self.coeffs.a > self.a - 1 or self.coeffs.b < self.b:
            raise ValueError("coefficients must cover [a-1, b]")
        for beta in self.boundary:
            _check_beta(beta)

    @property
    def window(self):
        return self.a, self.b

    @property
    def size(self) -> int:
        return self.b - self.a + 1

    def modified(self) -> tuple[np.ndarray, np.ndarray]:
        """(alpha, rho) on [a-1, b] after the boundary substitution."""
        c = self.coeffs.sub(self.a - 1, self.b)
        al, rh = c.alphas.copy(), c.rhos.copy()
        b1, b2 = self.boundary
        if b1 is not OPEN:
            al[0], rh[0] = b1, 0.0
        if b2 is not OPEN:
            al[-1], rh[-1] = b2, 0.0
        return al, rh

    def blocks(self) -> np.ndarray:
        """Theta_j for j in [a-1, b], shape (b-a+2, 2, 2)."""
        al, rh = self.modified()
        out = np.empty((len(al), 2, 2), dtype=complex)
        out[:, 0, 0] = np.conj(al)
        out[:, 0, 1] = rh
        out[:, 1, 0] = np.conj(rh)
        out[:, 1, 1] = -al
        return out

    def factors(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense L and M on the extended index range [a-1, b+1]."""
        th = self.blocks()
        D = self.size + 2
        L = np.zeros((D, D), dtype=complex)
        M = np.zeros((D, D), dtype=complex)
        for i, j in enumerate(range(self.a - 1, self.b + 1)):
            X = L if j % 2 == 0 else M
            X[i:i + 2, i:i + 2] = th[i]
        return L, M

    def dense(self) -> np.ndarray:
        L, M = self.factors()
        return (L @ M)[1:-1, 1:-1]

    def dense_factors(self) -> tuple[np.ndarray, np.ndarray]:
        """Projected factors L_Lambda, M_Lambda (exact factorization when closed)."""
        L, M = self.factors()
        return L[1:-1, 1:-1], M[1:-1, 1:-1]

    def apply_vector(self, v: np.ndarray) -> np.ndarray:
        """E_Lambda v for a CMV vector on [a, b] using the block factors."""
        v = np.asarray(v, dtype=complex)
        if v.shape[0] != self.size:
            raise ValueError("vector length does not match the window")
        th = self.blocks()
        x = np.zeros((self.size + 2,) + v.shape[1:], dtype=complex)
        x[1:-1] = v
        for parity in (1, 0):  # M first, then L
            x = _apply_blocks(x, th, self.a - 1, parity)
        return x[1:-1]

    def restrict(self, sub, boundary=(1.0, 1.0)) -> "BandedUnitary":
        a, b = map(int, sub)
        if a > b:
            raise ValueError(f"malformed interval [{a}, {b}]")
        if a < self.a or b > self.b:
            raise ValueError("sub-window must lie inside the operator window")
        al, rh = self.modified()
        full = CoefficientSequence(self.a - 1, self.b, al, rh)
        return BandedUnitary(a, b, full.sub(a - 1, b), tuple(boundary))

    def eigvals(self) -> np.ndarray:
        return sort_by_arg(np.linalg.eigvals(self.dense()))

    def eig(self):
        w, V = np.linalg.eig(self.dense())
        order = np.argsort(np.mod(np.angle(w), 2 * np.pi))
        return w[order], V[:, order]


def _apply_blocks(x, th, j0, parity):
    """Apply the blocks Theta_j (j = j0 + i) of one parity to x indexed from j0."""
    out = x.copy()
    i = np.arange(len(th))
    i = i[(j0 + i) % 2 == parity % 2]
    i = i[i + 1 < len(x)]
    t = th[i]
    xa, xb = x[i], x[i + 1]
    if x.ndim > 1:
        t = t[..., None]
    out[i] = t[:, 0, 0] * xa + t[:, 0, 1] * xb
    out[i + 1] = t[:, 1, 0] * xa + t[:, 1, 1] * xb
    return out


def sort_by_arg(w: np.ndarray) -> np.ndarray:
    return w[np.argsort(np.mod(np.angle(w), 2 * np.pi), kind="stable")]


def assemble(coeffs: CoefficientSequence, boundary=(1.0, 1.0), window=None) -> BandedUnitary:
    """Factored operator on ``window`` (default: coefficient window minus its first index)."""
    if window is None:
        window = (coeffs.a + 1, coeffs.b)
    return BandedUnitary(int(window[0]), int(window[1]), coeffs, tuple(boundary))


def walk_operator(p: WalkParameters, sites, boundary=(1.0, 1.0), r=None) -> BandedUnitary:
    """Operator on the CMV window covering walk sites n0..n1."""
    n0, n1 = sites
    a, b = 2 * n0 - 1, 2 * n1
    return assemble(generate_coefficients(p, (a - 1, b), r=r), boundary, (a, b))


def cmv_window_operator(p: WalkParameters, window, boundary=(1.0, 1.0), r=None) -> BandedUnitary:
    a, b = window
    return assemble(generate_coefficients(p, (a - 1, b), r=r), boundary, (a, b))


def apply(op: BandedUnitary, psi: StateVector, margin: int = 2) -> StateVector:
    """W psi via the L M factors; psi must stay ``margin`` CMV sites away from the window edges."""
    a_psi, v = psi.to_cmv()
    nz = np.nonzero(np.abs(v) > 0)[0]
    if nz.size:
        lo, hi = a_psi + nz[0], a_psi + nz[-1]
        if lo < op.a + margin or hi > op.b - margin:
            raise LightConeError(
                f"support [{lo}, {hi}] within {margin} of window [{op.a}, {op.b}]")
    x = np.zeros(op.size, dtype=complex)
    if nz.size:
        x[lo - op.a:hi - op.a + 1] = v[nz[0]:nz[-1] + 1]
    y = op.apply_vector(x)
    return StateVector.from_cmv(op.a, y)


def apply_walk(p: WalkParameters, psi: StateVector, lam: float | None = None) -> StateVector:
    """W psi from the componentwise shift-coin formulas (state padded by one site each side).

    ``lam`` overrides the shift parameter (defaults to lambda1).
    """
    lam = p.lambda1 if lam is None else lam
    lamp = np.sqrt(1.0 - lam * lam)
    amps = np.zeros((len(psi.amps) + 2, 2), dtype=complex)
    amps[1:-1] = psi.amps
    sites = np.arange(psi.n0 - 1, psi.n1 + 2)
    q11, q12, q21, q22 = coin_entries(p, sites)
    u = q11 * amps[:, 0] + q12 * amps[:, 1]
    d = q21 * amps[:, 0] + q22 * amps[:, 1]
    out = np.zeros_like(amps)
    out[1:, 0] += lam * u[:-1]
    out[:, 0] -= lamp * d
    out[:-1, 1] += lam * d[1:]
    out[:, 1] += lamp * u
    return StateVector(psi.n0 - 1, out)


def apply_walk_transpose(p: WalkParameters, psi: StateVector, lam: float | None = None,
                         pad: int = 1) -> StateVector:
    """W^T psi from the componentwise transpose formulas."""
    lam = p.lambda1 if lam is None else lam
    lamp = np.sqrt(1.0 - lam * lam)
    amps = np.zeros((len(psi.amps) + 2 * pad, 2), dtype=complex)
    amps[pad:len(amps) - pad] = psi.amps
    sites = np.arange(psi.n0 - pad, psi.n1 + pad + 1)
    q11, q12, q21, q22 = coin_entries(p, sites)
    up = lamp * amps[:, 1]
    up[:-1] += lam * amps[1:, 0]
    dn = -lamp * amps[:, 0]
    dn[1:] += lam * amps[:-1, 1]
    out = np.empty_like(amps)
    out[:, 0] = q11 * up + q21 * dn
    out[:, 1] = q12 * up + q22 * dn
    return StateVector(psi.n0 - pad, out)


@dataclass
class GaugePhases:
    a: int
    u: np.ndarray  # u_j for j in [a, a + len(u) - 1]


def gauge_phases(rhos: np.ndarray, j0: int) -> GaugePhases:
    """Diagonal phases with u_j conj(u_{j+1}) = rho_j / |rho_j|, u_{j0} = 1."""
    r = np.asarray(rhos, dtype=complex)
    mod = np.abs(r)
    ph = np.ones_like(r)
    nz = mod > 0
    ph[nz] = r[nz] / mod[nz]
    # u_{j+1} = u_j * conj(phase_j)
    u = np.concatenate([[1.0 + 0j], np.cumprod(np.conj(ph))])
    u /= np.abs(u)
    return GaugePhases(j0, u)


def gauge_to_ecmv(op: BandedUnitary, tol: float = 1e-13):
    """Standard ECMV (rho -> |rho|) and the phases U with E = U E_tilde U^*."""
    al, rh = op.modified()
    interior = rh[1:-1] if len(rh) > 2 else rh[:0]
    closed = [op.boundary[0] is not OPEN, op.boundary[1] is not OPEN]
    check = np.concatenate([rh[:1] if not closed[0] else [], interior, rh[-1:] if not closed[1] else []])
    if check.size and np.min(np.abs(check)) < tol:
        raise SingularCoefficientError("a rho coefficient vanishes; gauge undefined")
    raw = op.coeffs.sub(op.a - 1, op.b)
    new = CoefficientSequence(raw.a, raw.b, raw.alphas.copy(), np.abs(raw.rhos).astype(complex))
    gp = gauge_phases(rh, op.a - 1)  # phases on [a-1, b+1]
    ecmv = BandedUnitary(op.a, op.b, new, op.boundary)
    # keep phases for the window itself
    return ecmv, GaugePhases(op.a, gp.u[1:-1].copy())


def free_state(n0: int, n1: int, seed: int = 0) -> StateVector:
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=(n1 - n0 + 1, 2)) + 1j * rng.normal(size=(n1 - n0 + 1, 2))
    amps /= np.linalg.norm(amps)
    return StateVector(n0, amps)
