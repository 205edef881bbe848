"""Finite-volume spectra, characteristic polynomials and Green's functions.

Everything here works with the standard extended CMV form (rho -> |rho|),
which shares spectra and Green's function moduli with the walk matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gecmv import OPEN, BandedUnitary, cmv_window_operator, sort_by_arg
from .model import CoefficientSequence, ContinuedFractionData, WalkParameters, generate_coefficients, uniform_index_sets


class NearEigenvalueError(ArithmeticError):
    def __init__(self, msg, z=None):
        super().__init__(msg)
        self.z = z


def ecmv_coefficients(p: WalkParameters, window, r=None) -> CoefficientSequence:
    c = generate_coefficients(p, window, r=r)
    return CoefficientSequence(c.a, c.b, c.alphas, np.abs(c.rhos).astype(complex))


def ecmv_operator(p: WalkParameters, window, boundary=(1.0, 1.0), r=None) -> BandedUnitary:
    a, b = window
    return BandedUnitary(a, b, ecmv_coefficients(p, (a - 1, b), r=r), tuple(boundary))


def centered_window(size: int, center: int = 0) -> tuple[int, int]:
    """Even-aligned CMV window of the given size around ``center``."""
    a = center - size // 2
    a -= a % 2
    return a, a + size - 1


# -- spectra ----------------------------------------------------------------------

def truncation_spectrum(p: WalkParameters, size: int = 512, boundary=(1.0, 1.0), r=None,
                        center: int = 0) -> np.ndarray:
    return sort_by_arg(np.linalg.eigvals(cmv_window_operator(p, centered_window(size, center), boundary, r).dense()))


def spectrum_union(p: WalkParameters, size: int = 512, n_theta: int = 4, r=None) -> np.ndarray:
    """Union of closed truncation spectra at n_theta phases spaced a quarter window apart along the orbit."""
    parts = []
    for j in range(n_theta):
        # shifting the phase along the orbit moves the window, not the spectrum
        q = p.with_(theta=p.theta + j * (size // n_theta) * p.phi)
        parts.append(truncation_spectrum(q, size, r=r))
    return sort_by_arg(np.concatenate(parts))


def bulk_eigenpairs(p: WalkParameters, size: int = 512, edge_fraction: float = 0.125,
                    max_edge_mass: float = 0.3, r=None, center: int = 0):
    """Eigenpairs of a closed truncation whose weight is not concentrated at the edges.

    Edge-localised states of a finite window may sit in spectral gaps, so
    they are dropped before eigenvalues are used as spectral samples.
    """
    a, b = centered_window(size, center)
    op = cmv_window_operator(p, (a, b), (1.0, 1.0), r)
    w, V = np.linalg.eig(op.dense())
    m = max(1, int(edge_fraction * size))
    mass = np.abs(V) ** 2
    mass /= mass.sum(axis=0)
    edge = mass[:m].sum(axis=0) + mass[-m:].sum(axis=0)
    keep = edge < max_edge_mass
    w, V = w[keep], V[:, keep]
    order = np.argsort(np.mod(np.angle(w), 2 * np.pi))
    return w[order], V[:, order], (a, b)


def spectral_samples(p: WalkParameters, n_z: int = 16, size: int = 512, r=None) -> np.ndarray:
    """n_z truncation eigenvalues spread evenly by argument (bulk states only)."""
    w, _, _ = bulk_eigenpairs(p, size, r=r)
    if w.size == 0:
        w = truncation_spectrum(p, size, r=r)
    idx = np.unique(np.linspace(0, w.size - 1, min(n_z, w.size) + 2).round().astype(int)[1:-1])
    if idx.size == 0:
        idx = np.arange(min(n_z, w.size))
    z = w[idx]
    return z / np.abs(z)


def hausdorff_distance(A, B) -> float:
    """Symmetric Hausdorff distance with the chord metric."""
    A = np.atleast_1d(np.asarray(A, dtype=complex))
    B = np.atleast_1d(np.asarray(B, dtype=complex))
    if A.size == 0 or B.size == 0:
        raise ValueError("both spectra must be nonempty")
    d = np.abs(A[:, None] - B[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# -- characteristic polynomials ----------------------------------------------------

@dataclass
class CharPolyFrame:
    window: tuple
    boundary: tuple
    z: np.ndarray
    values: np.ndarray
    route: str
    log_abs: np.ndarray = field(default=None)


def _beta_value(beta, fallback):
    return fallback if beta is OPEN else beta


def char_poly_product(alphas_window: np.ndarray, alpha_left, alpha_right, z, b1, b2):
    """Boundary sandwich of the S-tilde product; returns (P, log scale) with P = value * e^scale.

    ``alphas_window`` holds alpha_a..alpha_b, ``alpha_left`` is alpha_{a-1}.
    """
    b1 = _beta_value(b1, alpha_left)
    b2 = _beta_value(b2, alpha_right)
    m = np.array([[z, -np.conj(b2)], [z, np.conj(b2)]], dtype=complex)
    scale = 0.0
    # factors j = b-1 down to a, applied left to right
    for i, al in enumerate(alphas_window[-2::-1] if len(alphas_window) > 1 else []):
        m = m @ np.array([[z, -np.conj(al)], [-al * z, 1.0]], dtype=complex)
        if (i + 1) % 16 == 0:
            s = np.abs(m).max()
            if s > 0:
                m /= s
                scale += math.log(s)
    m = m @ np.array([[1.0, 1.0], [-b1, b1]], dtype=complex)
    return m, scale


def char_poly(p: WalkParameters, window, boundary=(1.0, 1.0), zs=(1.0,), route="product_formula",
              r=None) -> CharPolyFrame:
    """P_{z,[a,b]}^{beta1,beta2} = det(z - E_tilde) by the product formula or a direct determinant."""
    a, b = map(int, window)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    for beta in boundary:
        if beta is not OPEN and abs(abs(beta) - 1) > 1e-12:
            raise ValueError("boundary values must be unit modulus or OPEN")
    if a > b:
        return CharPolyFrame((a, b), tuple(boundary), zs, np.ones(zs.size, complex), route, np.zeros(zs.size))
    vals = np.empty(zs.size, complex)
    logs = np.empty(zs.size)
    if route == "product_formula":
        c = ecmv_coefficients(p, (a - 1, b), r=r)
        al = c.alphas
        for i, z in enumerate(zs):
            m, sc = char_poly_product(al[1:], al[0], al[-1], z, *boundary)
            v = m[0, 0]
            logs[i] = (math.log(abs(v)) if v != 0 else -np.inf) + sc
            vals[i] = v * math.exp(sc) if sc < 700 else v * np.inf
    elif route == "direct_det":
        E = ecmv_operator(p, (a, b), boundary, r).dense()
        n = E.shape[0]
        for i, z in enumerate(zs):
            sign, ld = np.linalg.slogdet(z * np.eye(n) - E)
            vals[i] = sign * np.exp(ld)
            logs[i] = ld
    else:
        raise ValueError(f"unknown route {route}")
    return CharPolyFrame((a, b), tuple(boundary), zs, vals, route, logs)


def _P(p, a, b, z, b1, b2, r=None):
    return char_poly(p, (a, b), (b1, b2), [z], r=r).values[0]


# -- Green's functions ------------------------------------------------------------

@dataclass
class GreenFrame:
    window: tuple
    boundary: tuple
    z: complex
    G: np.ndarray  # full matrix (inverse route) or None
    route: str

    def __call__(self, x: int, y: int) -> complex:
        a = self.window[0]
        return self.G[x - a, y - a]


def green_function(p: WalkParameters, window, boundary=(1.0, 1.0), z=1.0, route="inverse",
                   entries=None, r=None, rel_tol: float = 1e-12):
    """Finite-volume Green's function (z L^* - M)^{-1} of the closed window.

    route="inverse" returns the full matrix; route="cramer" returns |G| at the
    requested (x, y) entries from characteristic polynomials.  The Cramer
    representation only holds for z on the unit circle.
    """
    a, b = map(int, window)
    if any(beta is OPEN for beta in boundary):
        raise ValueError("Green's function needs closed boundaries")
    op = ecmv_operator(p, (a, b), boundary, r)
    PL = char_poly(p, (a, b), boundary, [z], r=r).values[0]
    scale = max(1.0, abs(z)) ** (b - a + 1)
    if abs(PL) < rel_tol * scale:
        raise NearEigenvalueError(f"z = {z} is (nearly) an eigenvalue of the window", z=z)
    if route == "inverse":
        L, M = op.dense_factors()
        G = np.linalg.inv(z * L.conj().T - M)
        return GreenFrame((a, b), tuple(boundary), z, G, route)
    if route != "cramer":
        raise ValueError(f"unknown route {route}")
    if abs(abs(z) - 1.0) > 1e-12:
        raise ValueError("the Cramer route needs |z| = 1")
    if entries is None:
        entries = [(x, y) for x in range(a, b + 1) for y in range(a, b + 1)]
    rho = np.abs(op.coeffs.sub(a, b).rhos)
    b1, b2 = boundary
    out = {}
    for x, y in entries:
        lo, hi = min(x, y), max(x, y)
        rp = float(np.prod(rho[lo - a:hi - a]))
        left = _P(p, a, lo - 1, z, b1, OPEN, r)
        right = _P(p, hi + 1, b, z, OPEN, b2, r)
        out[(x, y)] = abs(rp * left * right / PL)
    return out


def boundary_terms(p: WalkParameters, psi, window, boundary, z, r=None):
    """psi_tilde(a), psi_tilde(b) for the boundary-to-interior identity.

    ``psi`` is a callable j -> psi(j) on CMV indices (needs a-1 and b+1).
    """
    a, b = window
    b1, b2 = boundary
    c = ecmv_coefficients(p, (a - 1, b), r=r)
    al = lambda j: c.alpha(j)
    rh = lambda j: abs(c.rho(j))
    if a % 2 == 0:
        ta = rh(a - 1) * psi(a - 1) - (al(a - 1) - b1) * psi(a)
    else:
        ta = (z * np.conj(al(a - 1)) - z * np.conj(b1)) * psi(a) - z * rh(a - 1) * psi(a - 1)
    if b % 2 == 0:
        tb = (z * b2 - z * al(b)) * psi(b) - z * rh(b) * psi(b + 1)
    else:
        tb = (np.conj(al(b)) - np.conj(b2)) * psi(b) + rh(b) * psi(b + 1)
    return ta, tb


# -- localisation diagnostics ----------------------------------------------------------

def alternating_reflection(E: np.ndarray) -> np.ndarray:
    """(E^R)_{ij} = (-1)^{i+j} E_{-1-i,-1-j} for a matrix on the window [-n, n-1]."""
    n = E.shape[0]
    s = (-1.0) ** np.arange(n)
    return (s[:, None] * s[None, :]) * E[::-1, ::-1]


@dataclass
class EvennessReport:
    residual: float
    reflection_spectral_gap: float
    reflection_matrix_residual: float


def evenness_check(p: WalkParameters, n: int, z, thetas, boundary=(1.0, 1.0)) -> EvennessReport:
    """Evenness of theta -> P_{z,[1,4n-2]}(theta - n phi) and the alternating-reflection checks."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    win = (1, 4 * n - 2)
    plus = np.array([_P(p.with_(theta=th - n * p.phi), *win, z, *boundary) for th in thetas])
    minus = np.array([_P(p.with_(theta=-th - n * p.phi), *win, z, *boundary) for th in thetas])
    residual = float(np.abs(plus - minus).max() / max(np.abs(plus).max(), 1e-300))
    # reflection on [-n, n-1]
    E = ecmv_operator(p, (-n, n - 1), boundary).dense()
    ER = alternating_reflection(E)
    w1 = sort_by_arg(np.linalg.eigvals(E))
    w2 = sort_by_arg(np.linalg.eigvals(ER))
    gap = hausdorff_distance(w1, w2)
    # the reflected matrix is the window at the opposite phase (conjugate boundary swap)
    Em = ecmv_operator(p.with_(theta=-p.theta), (-n, n - 1), (np.conj(boundary[1]), np.conj(boundary[0]))).dense()
    mres = float(np.abs(ER - Em).max())
    return EvennessReport(residual, gap, mres)


def char_poly_fourier_mass(p: WalkParameters, n: int, z, n_theta: int = 4096, boundary=(1.0, 1.0)):
    """Relative spectral mass of theta -> P_{z,[1,4n-2]}(theta) outside |m| <= 2n-1."""
    th = np.arange(n_theta) / n_theta
    vals = np.array([_P(p.with_(theta=x), 1, 4 * n - 2, z, *boundary) for x in th])
    c = np.fft.fft(vals) / n_theta
    m = np.fft.fftfreq(n_theta, d=1.0 / n_theta)
    out = np.abs(m) > 2 * n - 1
    return float(np.sum(np.abs(c[out]) ** 2) / np.sum(np.abs(c) ** 2))


@dataclass
class RegularityVerdict:
    y: int
    gamma: float
    k: int
    witness: tuple | None
    is_regular: bool
    bounds: tuple | None = None  # (|G(y,n1)|, |G(y,n2)|) for the witness or the best attempt
    reason: str = ""


def regularity_verdict(p: WalkParameters, z, gamma: float, k: int, y: int, boundary=(1.0, 1.0),
                       domain: tuple | None = None) -> RegularityVerdict:
    """Search windows [n1, n1+k-1] containing y for Green decay at rate gamma to both edges."""
    if gamma <= 0 or k < 7:
        raise ValueError("need gamma > 0 and k >= 7")
    best = None
    best_excess = np.inf
    found_window = False
    for n1 in range(y - k + 1, y + 1):
        n2 = n1 + k - 1
        if domain is not None and (n1 < domain[0] or n2 > domain[1]):
            continue
        if abs(y - n1) < k / 7 or abs(y - n2) < k / 7:
            continue
        found_window = True
        try:
            gf = green_function(p, (n1, n2), boundary, z)
        except NearEigenvalueError:
            continue
        g1, g2 = abs(gf(y, n1)), abs(gf(y, n2))
        e1 = math.log(g1) + gamma * abs(y - n1) if g1 > 0 else -np.inf
        e2 = math.log(g2) + gamma * abs(y - n2) if g2 > 0 else -np.inf
        excess = max(e1, e2)
        if excess < best_excess:
            best_excess, best = excess, ((n1, n2), (g1, g2))
        if excess < 0:
            return RegularityVerdict(y, gamma, k, (n1, n2), True, (g1, g2), "green bounds hold")
    if not found_window:
        return RegularityVerdict(y, gamma, k, None, False, None, "no admissible window")
    return RegularityVerdict(y, gamma, k, best[0] if best else None, False,
                             best[1] if best else None, "green bound violated")


def uniformity_measure(thetas, n_grid: int = 2048) -> float:
    """(1/(2n-1)) ln max_u max_j prod_{i != j} |u - c_i| / |c_j - c_i|, c = cos 2 pi theta."""
    c = np.cos(2 * np.pi * np.asarray(thetas, dtype=float))
    N = c.size
    if N < 2:
        raise ValueError("need at least two nodes")
    cs = np.sort(c)
    if np.min(np.diff(cs)) < 1e-12:
        raise ValueError("duplicate nodes (cos values within 1e-12)")
    u = np.concatenate([np.linspace(-1, 1, n_grid), c, 0.5 * (cs[1:] + cs[:-1])])
    with np.errstate(divide="ignore", invalid="ignore"):
        Lu = np.log(np.abs(u[:, None] - c[None, :]))
        row = Lu.sum(axis=1, keepdims=True)
        num = row - Lu  # sum over i != j
        Lc = np.log(np.abs(c[:, None] - c[None, :]))
        np.fill_diagonal(Lc, 0.0)
        den = Lc.sum(axis=1)
        val = num - den[None, :]
    # u equal to node j with j itself excluded gives ratio 1 (0/0 artefacts)
    val = np.where(np.isnan(val), 0.0, val)
    return float(val.max() / (N - 1))


def uniformity_nodes(p: WalkParameters, cf: ContinuedFractionData, y: int) -> np.ndarray:
    I1, I2 = uniform_index_sets(cf, y)
    idx = np.concatenate([I1, I2])
    return p.theta + idx * p.phi


def rho_growth(p: WalkParameters, n: int = 100000, start: int = 0) -> float:
    """(1/n) sum_{j} ln|rho_j| over CMV indices start..start+n-1."""
    c = generate_coefficients(p, (start, start + n - 1))
    return float(np.mean(np.log(np.abs(c.rhos))))
