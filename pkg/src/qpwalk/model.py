"""Model parameters, sampling functions and Verblunsky coefficients.

The walk is W = S_lambda1 Q with a quasi-periodic coin whose entries are the
sampling functions f and g evaluated along the orbit theta + n*phi.  Viewed as
an extended CMV matrix, even indices carry the constant pair
(lambda1', lambda1) and odd indices 2n-1 carry (g, conj f) at theta + n*phi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

TWO_PI = 2.0 * math.pi


class ParameterError(ValueError):
    """Raised when model parameters are outside their admissible range."""


@dataclass(frozen=True)
class WalkParameters:
    lambda1: float
    lambda2: float
    t: float = 0.0
    phi: float = GOLDEN
    theta: float = 0.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ParameterError(f"{name}={v} must lie strictly inside (0, 1)")
        if not abs(self.t) < 1.0:
            raise ParameterError(f"|t| must be < 1, got t={self.t}")
        if not math.isfinite(self.phi):
            raise ParameterError("phi must be finite")
        object.__setattr__(self, "theta", float(self.theta) % 1.0)

    @property
    def lambda1p(self) -> float:
        return math.sqrt(1.0 - self.lambda1 ** 2)

    @property
    def lambda2p(self) -> float:
        return math.sqrt(1.0 - self.lambda2 ** 2)

    @property
    def k(self) -> float:
        return -(1.0 + self.t ** 2)

    @property
    def threshold(self) -> float:
        return abs(1.0 - self.t ** 2) / (1.0 + self.t ** 2)

    @property
    def singular(self) -> bool:
        """True when f vanishes somewhere on the torus."""
        return self.lambda2 >= self.threshold

    def with_(self, **kw) -> "WalkParameters":
        return replace(self, **kw)

    def dual(self) -> "WalkParameters":
        """Parameters of the Aubry dual walk (lambda1 and lambda2 exchanged)."""
        return replace(self, lambda1=self.lambda2, lambda2=self.lambda1)

    def as_dict(self) -> dict:
        return {"lambda1": self.lambda1, "lambda2": self.lambda2, "t": self.t,
                "phi": self.phi, "theta": self.theta}


@dataclass(frozen=True)
class ComplexPhasePoint:
    x: float
    eps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x) % 1.0)


def _phase(x, eps):
    x = np.asarray(x, dtype=float)
    return np.exp(TWO_PI * 1j * (x + 1j * eps))


def _xe(z, eps):
    if isinstance(z, ComplexPhasePoint):
        return z.x, z.eps
    return z, eps


def sample_f(p: WalkParameters, z, eps: float = 0.0):
    """f at x + i*eps (exponential form so the continuation is literal).

    ``z`` may be a ComplexPhasePoint or an array of real x values.
    """
    x, eps = _xe(z, eps)
    w = _phase(x, eps)
    out = (p.t * p.lambda2 * w + p.t * p.lambda2 / w + (p.t ** 2 - 1.0) * p.lambda2p) / p.k
    return out[()] if np.ndim(out) == 0 else out


def sample_g(p: WalkParameters, z, eps: float = 0.0):
    x, eps = _xe(z, eps)
    w = _phase(x, eps)
    out = (-p.t ** 2 * p.lambda2 * w + p.lambda2 / w + 2.0 * p.t * p.lambda2p) / p.k
    return out[()] if np.ndim(out) == 0 else out


def sample_g_hat(p: WalkParameters, z, eps: float = 0.0):
    """Entire continuation of conj(g(x)); equals conj(g) on the real axis."""
    x, eps = _xe(z, eps)
    w = _phase(x, eps)
    out = (-p.t ** 2 * p.lambda2 / w + p.lambda2 * w + 2.0 * p.t * p.lambda2p) / p.k
    return out[()] if np.ndim(out) == 0 else out


def k_r(p: WalkParameters, r: float) -> float:
    _need_t(p)
    t = p.t
    return -math.sqrt(1.0 + r * r + r * r / (t * t) + t * t)


def _need_t(p):
    if p.t == 0.0:
        raise ParameterError("the perturbed family needs t != 0")


def sample_f_r(p: WalkParameters, r: float, z, eps: float = 0.0):
    _need_t(p)
    x, eps = _xe(z, eps)
    w = _phase(x, eps)
    t, l2, l2p = p.t, p.lambda2, p.lambda2p
    out = ((r / t) * l2 * w + t * l2 / w + (r - 1.0) * l2p) / k_r(p, r)
    return out[()] if np.ndim(out) == 0 else out


def sample_g_r(p: WalkParameters, r: float, z, eps: float = 0.0):
    _need_t(p)
    x, eps = _xe(z, eps)
    w = _phase(x, eps)
    t, l2, l2p = p.t, p.lambda2, p.lambda2p
    out = (-r * l2 * w + l2 / w + (t + r / t) * l2p) / k_r(p, r)
    return out[()] if np.ndim(out) == 0 else out


def sample_g_r_hat(p: WalkParameters, r: float, z, eps: float = 0.0):
    """Entire continuation of conj(g_r(x))."""
    _need_t(p)
    x, eps = _xe(z, eps)
    w = _phase(x, eps)
    t, l2, l2p = p.t, p.lambda2, p.lambda2p
    out = (-r * l2 / w + l2 * w + (t + r / t) * l2p) / k_r(p, r)
    return out[()] if np.ndim(out) == 0 else out


def coin_entries(p: WalkParameters, sites, r: float | None = None):
    """Coin matrices Q_n for integer sites n, returned as (q11, q12, q21, q22).

    Q_n = [[conj rho, -alpha], [conj alpha, rho]] with alpha, rho taken at
    CMV index 2n-1.
    """
    x = p.theta + np.asarray(sites, dtype=float) * p.phi
    if r is None:
        f, g = sample_f(p, x), sample_g(p, x)
    else:
        f, g = sample_f_r(p, r, x), sample_g_r(p, r, x)
    return f, -g, np.conj(g), f


@dataclass
class CoefficientSequence:
    """Verblunsky pairs (alpha_n, rho_n) on the CMV index window [a, b]."""
    a: int
    b: int
    alphas: np.ndarray
    rhos: np.ndarray

    @property
    def window(self) -> tuple[int, int]:
        return self.a, self.b

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.a, self.b + 1)

    def __len__(self):
        return self.b - self.a + 1

    def alpha(self, j: int) -> complex:
        return self.alphas[j - self.a]

    def rho(self, j: int) -> complex:
        return self.rhos[j - self.a]

    def sub(self, a: int, b: int) -> "CoefficientSequence":
        if a < self.a or b > self.b or a > b:
            raise ValueError(f"[{a},{b}] not inside [{self.a},{self.b}]")
        s = slice(a - self.a, b - self.a + 1)
        return CoefficientSequence(a, b, self.alphas[s].copy(), self.rhos[s].copy())

    def normalization_defect(self) -> float:
        return float(np.max(np.abs(np.abs(self.alphas) ** 2 + np.abs(self.rhos) ** 2 - 1.0)))


def generate_coefficients(p: WalkParameters, window: tuple[int, int],
                          r: float | None = None) -> CoefficientSequence:
    a, b = map(int, window)
    if a > b:
        raise ValueError("empty coefficient window")
    j = np.arange(a, b + 1)
    alphas = np.empty(j.size, dtype=complex)
    rhos = np.empty(j.size, dtype=complex)
    even = (j % 2) == 0
    alphas[even] = p.lambda1p
    rhos[even] = p.lambda1
    odd = ~even
    # odd CMV index 2n-1 belongs to coin site n
    n = (j[odd] + 1) // 2
    x = p.theta + n * p.phi
    if r is None:
        alphas[odd] = sample_g(p, x)
        rhos[odd] = np.conj(sample_f(p, x))
    else:
        alphas[odd] = sample_g_r(p, r, x)
        rhos[odd] = np.conj(sample_f_r(p, r, x))
    return CoefficientSequence(a, b, alphas, rhos)


# -- arithmetic of phi and theta ---------------------------------------------

@dataclass
class ContinuedFractionData:
    phi: float
    partial_quotients: list = field(default_factory=list)
    convergent_numers: list = field(default_factory=list)
    convergent_denoms: list = field(default_factory=list)

    def tau(self) -> float:
        """Diophantine exponent proxy 1 + max log q_{m+1} / log q_m, clamped to [1.01, 10]."""
        q = self.convergent_denoms
        best = 0.0
        for qm, qn in zip(q[:-1], q[1:]):
            if qm > 1:
                best = max(best, math.log(qn) / math.log(qm))
        return min(max(1.0 + best, 1.01), 10.0)


def continued_fraction(phi: float, depth: int = 30) -> ContinuedFractionData:
    """Expansion of phi in (0, 1) (the integer part is dropped).

    Stops early when the remainder drops below 1e-14.  Denominators start
    q_0 = 1, q_1 = a_1, and numerators p_0 = 0, p_1 = 1.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = float(phi) % 1.0
    cf = ContinuedFractionData(phi=float(phi))
    p_prev, p = 1, 0
    q_prev, q = 0, 1
    cf.convergent_numers.append(p)
    cf.convergent_denoms.append(q)
    for _ in range(depth):
        if x < 1e-14:
            break
        y = 1.0 / x
        a = int(math.floor(y))
        frac = y - a
        # guard against floating noise just below an integer
        if 1.0 - frac < 1e-12:
            a += 1
            frac = 0.0
        cf.partial_quotients.append(a)
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        cf.convergent_numers.append(p)
        cf.convergent_denoms.append(q)
        x = frac
    return cf


@dataclass
class ResonanceReport:
    theta: float
    N: int
    tau: float
    witnesses: list

    @property
    def is_resonant_up_to_N(self) -> bool:
        return len(self.witnesses) > 0


def resonance_test(cf: ContinuedFractionData, theta: float, N: int) -> ResonanceReport:
    """Scan nonzero half-integers |n| <= N for |sin 2pi(theta + n phi)| < exp(-|n|^(1/(2 tau)))."""
    if N < 1:
        raise ValueError("N must be >= 1")
    tau = cf.tau()
    m = np.arange(-2 * N, 2 * N + 1)
    m = m[m != 0]
    n = m / 2.0
    # reduce the argument before multiplying by 2pi to keep precision
    arg = np.mod(theta + n * cf.phi, 1.0)
    s = np.abs(np.sin(TWO_PI * arg))
    bound = np.exp(-np.abs(n) ** (1.0 / (2.0 * tau)))
    hit = s < bound
    wit = [(float(nn), float(ss), float(bb)) for nn, ss, bb in zip(n[hit], s[hit], bound[hit])]
    return ResonanceReport(theta=float(theta), N=int(N), tau=tau, witnesses=wit)


def uniform_index_sets(cf: ContinuedFractionData, y: int):
    """Index sets I1, I2 used for the uniformity argument at site y.

    q_m is the largest denominator with q_m <= y/16 and s the largest positive
    integer with s*q_m < y/16.
    """
    q = cf.convergent_denoms
    target = y / 16.0
    cands = [qq for qq in q if qq <= target]
    if not cands:
        raise ValueError("y too small for the available convergents")
    qm = max(cands)
    if all(qq <= target for qq in q):
        raise ValueError("continued fraction too shallow for this y")
    s = max(1, int(math.ceil(target / qm)) - 1)
    while s * qm >= target and s > 1:
        s -= 1
    sq = s * qm
    lo1 = (1 + (-1) ** sq) // 2
    I1 = np.arange(lo1, sq + 1)
    I2 = np.arange(1 + y - sq, y + sq + 1)
    return I1, I2
