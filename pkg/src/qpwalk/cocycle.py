"""Transfer matrices and Szego cocycles over the rotation x -> x + phi.

All odd-index coefficient functions are trigonometric polynomials
    c(w) = c1 * w + c2 / w + c0,   w = exp(2 pi i (x + i eps)),
so a cocycle variant is described by three such triples: alpha (g),
the entire continuation of conj(alpha) (g_hat) and the entire continuation
of rho (conj f).  This makes complexified phases literal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .model import TWO_PI, ComplexPhasePoint, WalkParameters, k_r

SINGULAR_TOL = 1e-12
QUARANTINE_TOL = 1e-6
RESCALE_EVERY = 16

J = np.array([[0, 1], [1, 0]], dtype=complex)
R_SYM = np.array([[0, 1], [-1, 0]], dtype=complex)
P_SL2R = np.array([[1, 1j], [1j, 1]], dtype=complex) / math.sqrt(2.0)
J_FORM = np.diag([1.0, -1.0]).astype(complex)


class SingularSamplingError(ArithmeticError):
    def __init__(self, msg, step=None, x=None):
        super().__init__(msg)
        self.step = step
        self.x = x


@dataclass
class Cocycle2x2:
    m: np.ndarray
    tag: str = "general"

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=complex).reshape(2, 2)
        if self.tag not in ("su11", "sl2r", "general"):
            raise ValueError(f"unknown tag {self.tag}")

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.m))

    def su11_defect(self) -> float:
        """max of |det - 1| and the J-unitarity residual."""
        d = abs(self.det - 1.0)
        ju = np.abs(self.m.conj().T @ J_FORM @ self.m - J_FORM).max()
        return float(max(d, ju))

    def sl2r_defect(self) -> float:
        return float(max(np.abs(self.m.imag).max(), abs(self.det - 1.0)))

    def to_json(self) -> dict:
        return {"tag": self.tag, "re": self.m.real.ravel().tolist(), "im": self.m.imag.ravel().tolist()}


# -- coefficient triples --------------------------------------------------------

@dataclass(frozen=True)
class Trig:
    c1: complex
    c2: complex
    c0: complex

    def __call__(self, x, eps=0.0):
        w = np.exp(TWO_PI * 1j * (np.asarray(x, dtype=float) + 1j * eps))
        return self.c1 * w + self.c2 / w + self.c0

    def as_array(self):
        return np.array([self.c1, self.c2, self.c0], dtype=complex)


def odd_triples(p: WalkParameters, r: float | None = None):
    """(alpha, alpha_hat, rho_hat, f) trig triples for odd CMV indices.

    rho_hat is the continuation of rho = conj f; f itself is returned too
    (used for the |f| normalisation).
    """
    l2, l2p, t = p.lambda2, p.lambda2p, p.t
    if r is None:
        k = p.k
        f = Trig(t * l2 / k, t * l2 / k, (t * t - 1.0) * l2p / k)
        g = Trig(-t * t * l2 / k, l2 / k, 2 * t * l2p / k)
        gh = Trig(l2 / k, -t * t * l2 / k, 2 * t * l2p / k)
        fh = f
    else:
        kr = k_r(p, r)
        f = Trig((r / t) * l2 / kr, t * l2 / kr, (r - 1.0) * l2p / kr)
        g = Trig(-r * l2 / kr, l2 / kr, (t + r / t) * l2p / kr)
        gh = Trig(l2 / kr, -r * l2 / kr, (t + r / t) * l2p / kr)
        fh = Trig(f.c2, f.c1, f.c0)  # real coefficients: swap w and 1/w
    return g, gh, fh, f


VARIANTS = ("transfer_A", "szego_one_step", "szego_two_step", "numerator_D", "perturbed", "custom")


@dataclass
class CocycleMapSpec:
    """Which 2x2 cocycle to evaluate, at which spectral parameter z."""
    params: WalkParameters | None
    z: complex = 1.0
    variant: str = "szego_two_step"
    r: float | None = None
    parity: int = 1  # szego_one_step: 0 = even index, 1 = odd index
    normalized: bool = True  # perturbed variant: normalised two-step or its numerator
    func: Callable | None = None  # custom: vectorised x (complex) -> (n, 2, 2)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant}")
        if self.z == 0:
            raise ValueError("z must be nonzero")
        if self.variant == "perturbed" and self.r is None:
            raise ValueError("perturbed variant needs r")
        if self.variant == "custom" and self.func is None:
            raise ValueError("custom variant needs func")

    @property
    def phi(self) -> float:
        return self.params.phi if self.params is not None else 0.0

    def d_family(self) -> bool:
        return self.variant in ("szego_two_step", "numerator_D", "perturbed")

    def normalizes(self) -> bool:
        return self.variant == "szego_two_step" or (self.variant == "perturbed" and self.normalized)


def _xe(x, eps):
    if isinstance(x, ComplexPhasePoint):
        return x.x, x.eps
    return x, eps


def sqrt_branch(z: complex) -> complex:
    """Principal square root with arg z taken in [0, 2 pi)."""
    ang = math.atan2(z.imag, z.real) % (2 * math.pi)
    return math.sqrt(abs(z)) * complex(math.cos(ang / 2), math.sin(ang / 2))


def szego_step(coeff, z: complex) -> Cocycle2x2:
    """Normalised one-step Szego matrix z^{-1/2}/|rho| [[z, -conj a], [-a z, 1]]."""
    alpha, rho = coeff
    if abs(rho) == 0:
        raise SingularSamplingError("rho = 0 in Szego step")
    if z == 0:
        raise ValueError("z must be nonzero")
    m = np.array([[z, -np.conj(alpha)], [-alpha * z, 1.0]], dtype=complex) / (sqrt_branch(z) * abs(rho))
    return Cocycle2x2(m, "su11" if abs(abs(z) - 1) < 1e-12 else "general")


def numerator_D(spec: CocycleMapSpec, x, eps: float = 0.0) -> Cocycle2x2:
    """Entire numerator D_z(x) of the two-step Szego matrix."""
    x, eps = _xe(x, eps)
    p, z = spec.params, spec.z
    g, gh, _, _ = odd_triples(p, spec.r if spec.variant == "perturbed" else None)
    gv, ghv, l1p = g(x, eps), gh(x, eps), p.lambda1p
    m = np.array([[z * z + l1p * z * gv, -z * ghv - l1p],
                  [-l1p * z * z - gv * z, l1p * z * ghv + 1.0]], dtype=complex)
    return Cocycle2x2(m, "general")


def abs_f_ext(p: WalkParameters, x, eps: float = 0.0, r: float | None = None):
    """sqrt(f(x + i eps) conj f(x - i eps)); equals |f(x)| at eps = 0."""
    _, _, _, f = odd_triples(p, r)
    v = f(x, eps) * np.conj(f(x, -eps))
    return np.sqrt(v)


def two_step(spec: CocycleMapSpec, x, eps: float = 0.0) -> Cocycle2x2:
    """Normalised S_z^+ = z^{-1} D_z / (lambda1 |f|_ext)."""
    x, eps = _xe(x, eps)
    p = spec.params
    r = spec.r if spec.variant == "perturbed" else None
    af = complex(abs_f_ext(p, x, eps, r))
    if abs(af) <= SINGULAR_TOL:
        raise SingularSamplingError(f"|f| <= {SINGULAR_TOL} at x = {x}", x=x)
    m = numerator_D(spec, x, eps).m / (spec.z * p.lambda1 * af)
    tag = "su11" if (eps == 0 and abs(abs(spec.z) - 1) < 1e-12) else "general"
    return Cocycle2x2(m, tag)


def transfer_A(spec: CocycleMapSpec, x, eps: float = 0.0) -> Cocycle2x2:
    """Transfer matrix A_z: (psi_{n+1}^+, psi_n^-) = A (psi_n^+, psi_{n-1}^-) at x = theta + n phi."""
    x, eps = _xe(x, eps)
    p, z = spec.params, spec.z
    g, gh, fh, _ = odd_triples(p, spec.r)
    a1, a1c, r1 = g(x, eps), gh(x, eps), fh(x, eps)
    if abs(r1) <= SINGULAR_TOL:
        raise SingularSamplingError(f"|f| <= {SINGULAR_TOL} at x = {x}", x=x)
    l1, l1p = p.lambda1, p.lambda1p
    # even neighbours carry (lambda1', lambda1)
    m = np.array([[1.0 / z + l1p * a1c + a1 * l1p + l1p * l1p * z, -l1 * a1 - l1 * l1p * z],
                  [-l1 * a1c - l1 * l1p * z, l1 * l1 * z]], dtype=complex) / (l1 * r1)
    return Cocycle2x2(m, "general")


def conjugation_R(alpha, rho) -> np.ndarray:
    return np.array([[1.0, 0.0], [-np.conj(alpha), abs(rho)]], dtype=complex)


def evaluate(spec: CocycleMapSpec, x, eps: float = 0.0) -> Cocycle2x2:
    v = spec.variant
    if v == "transfer_A":
        return transfer_A(spec, x, eps)
    if v == "numerator_D" or (v == "perturbed" and not spec.normalized):
        return numerator_D(spec, x, eps)
    if v in ("szego_two_step", "perturbed"):
        return two_step(spec, x, eps)
    if v == "szego_one_step":
        x, eps = _xe(x, eps)
        p = spec.params
        if spec.parity == 0:
            return szego_step((p.lambda1p, p.lambda1), spec.z)
        g, _, _, f = odd_triples(p, spec.r)
        return szego_step((complex(g(x, eps)), complex(f(x, eps))), spec.z)
    x, eps = _xe(x, eps)
    return Cocycle2x2(np.asarray(spec.func(np.atleast_1d(x + 1j * eps)))[0], "general")


def evaluate_many(spec: CocycleMapSpec, xs, eps: float = 0.0) -> np.ndarray:
    """Vectorised evaluation, shape (n, 2, 2)."""
    xs = np.asarray(xs, dtype=float)
    if spec.variant == "custom":
        return np.asarray(spec.func(xs + 1j * eps), dtype=complex)
    if spec.variant == "szego_one_step":
        return np.stack([evaluate(spec, x, eps).m for x in xs])
    p, z = spec.params, spec.z
    r = spec.r if spec.variant in ("perturbed", "transfer_A") else None
    g, gh, fh, f = odd_triples(p, r)
    gv, ghv = g(xs, eps), gh(xs, eps)
    l1, l1p = p.lambda1, p.lambda1p
    out = np.empty((xs.size, 2, 2), dtype=complex)
    if spec.variant == "transfer_A":
        r1 = fh(xs, eps)
        if np.any(np.abs(r1) <= SINGULAR_TOL):
            i = int(np.argmax(np.abs(r1) <= SINGULAR_TOL))
            raise SingularSamplingError("singular sample", step=i, x=xs[i])
        out[:, 0, 0] = 1.0 / z + l1p * ghv + gv * l1p + l1p * l1p * z
        out[:, 0, 1] = -l1 * gv - l1 * l1p * z
        out[:, 1, 0] = -l1 * ghv - l1 * l1p * z
        out[:, 1, 1] = l1 * l1 * z
        return out / (l1 * r1)[:, None, None]
    out[:, 0, 0] = z * z + l1p * z * gv
    out[:, 0, 1] = -z * ghv - l1p
    out[:, 1, 0] = -l1p * z * z - gv * z
    out[:, 1, 1] = l1p * z * ghv + 1.0
    if spec.normalizes():
        af = np.sqrt(f(xs, eps) * np.conj(f(xs, -eps)))
        if np.any(np.abs(af) <= SINGULAR_TOL):
            i = int(np.argmax(np.abs(af) <= SINGULAR_TOL))
            raise SingularSamplingError("singular sample", step=i, x=xs[i])
        out /= (z * l1 * af)[:, None, None]
    return out


# -- ordered products with a log-scale ledger ------------------------------------

@numba.njit(cache=True)
def _ordered_product(mats, every):
    a, b, c, d = 1.0 + 0j, 0j, 0j, 1.0 + 0j
    scale = 0.0
    comp = 0.0
    n = mats.shape[0]
    for j in range(n):
        m = mats[j]
        na = m[0, 0] * a + m[0, 1] * c
        nb = m[0, 0] * b + m[0, 1] * d
        nc = m[1, 0] * a + m[1, 1] * c
        nd = m[1, 0] * b + m[1, 1] * d
        a, b, c, d = na, nb, nc, nd
        if (j + 1) % every == 0:
            s = max(max(abs(a), abs(b)), max(abs(c), abs(d)))
            if s > 0.0:
                a /= s
                b /= s
                c /= s
                d /= s
                # Kahan summation of the log scale
                y = math.log(s) - comp
                tt = scale + y
                comp = (tt - scale) - y
                scale = tt
    out = np.empty((2, 2), dtype=np.complex128)
    out[0, 0] = a
    out[0, 1] = b
    out[1, 0] = c
    out[1, 1] = d
    return out, scale


@numba.njit(cache=True)
def _norm2(a, b, c, d):
    fro = abs(a) ** 2 + abs(b) ** 2 + abs(c) ** 2 + abs(d) ** 2
    det = abs(a * d - b * c)
    disc = fro * fro - 4.0 * det * det
    if disc < 0.0:
        disc = 0.0
    return math.sqrt(0.5 * (fro + math.sqrt(disc)))


@numba.njit(cache=True)
def _d_family_kernel(x0s, zs, epss, n_steps, phi, l1, l1p, gc, ghc, fc, normalize,
                     eps_norm_mode, every, q_tol, s_tol):
    """Products of D_z(x + j phi + i eps) for a batch of jobs.

    Returns per job: log-norm of the D product, the sum of ln(lambda1 |f|)
    (normalisation), the quarantine count, min |f| and the first singular step
    (-1 if none).  eps_norm_mode: 0 = |f| at the real phase, 1 = |f(x + i eps)|.
    """
    nj = x0s.shape[0]
    lognorm = np.empty(nj)
    fsum = np.zeros(nj)
    nquar = np.zeros(nj, dtype=np.int64)
    fmin = np.full(nj, np.inf)
    bad = np.full(nj, -1, dtype=np.int64)
    mats = np.empty((nj, 2, 2), dtype=np.complex128)
    scales = np.empty(nj)
    rot = complex(math.cos(2 * math.pi * phi), math.sin(2 * math.pi * phi))
    for jb in range(nj):
        z = zs[jb]
        eps = epss[jb]
        damp = math.exp(-2 * math.pi * eps)
        x0 = x0s[jb]
        a, b, c, d = 1.0 + 0j, 0j, 0j, 1.0 + 0j
        scale = 0.0
        comp = 0.0
        fs = 0.0
        fcomp = 0.0
        e = 0j
        for j in range(n_steps):
            if j % 64 == 0:
                xx = (x0 + j * phi) % 1.0
                e = complex(math.cos(2 * math.pi * xx), math.sin(2 * math.pi * xx))
            else:
                e = e * rot
            w = e * damp
            wi = 1.0 / w
            g = gc[0] * w + gc[1] * wi + gc[2]
            gh = ghc[0] * w + ghc[1] * wi + ghc[2]
            m00 = z * z + l1p * z * g
            m01 = -z * gh - l1p
            m10 = -l1p * z * z - g * z
            m11 = l1p * z * gh + 1.0
            na = m00 * a + m01 * c
            nb = m00 * b + m01 * d
            nc = m10 * a + m11 * c
            nd = m10 * b + m11 * d
            a, b, c, d = na, nb, nc, nd
            if normalize:
                if eps_norm_mode == 0:
                    fv = fc[0] * e + fc[1] / e + fc[2]
                else:
                    fv = fc[0] * w + fc[1] * wi + fc[2]
                af = abs(fv)
                if af < fmin[jb]:
                    fmin[jb] = af
                if af <= s_tol:
                    if bad[jb] < 0:
                        bad[jb] = j
                    af = s_tol
                if af < q_tol:
                    nquar[jb] += 1
                y = math.log(l1 * af * abs(z)) - fcomp
                tt = fs + y
                fcomp = (tt - fs) - y
                fs = tt
            if (j + 1) % every == 0 or j == n_steps - 1:
                s = max(max(abs(a), abs(b)), max(abs(c), abs(d)))
                if s > 0.0:
                    a /= s
                    b /= s
                    c /= s
                    d /= s
                    y = math.log(s) - comp
                    tt = scale + y
                    comp = (tt - scale) - y
                    scale = tt
        lognorm[jb] = scale + math.log(_norm2(a, b, c, d))
        fsum[jb] = fs
        mats[jb, 0, 0] = a
        mats[jb, 0, 1] = b
        mats[jb, 1, 0] = c
        mats[jb, 1, 1] = d
        scales[jb] = scale
    return lognorm, fsum, nquar, fmin, bad, mats, scales


@dataclass
class DFamilyRun:
    """Raw output of a batch of D-family products."""
    lognorm: np.ndarray
    fsum: np.ndarray
    nquar: np.ndarray
    fmin: np.ndarray
    bad: np.ndarray
    mats: np.ndarray
    scales: np.ndarray
    n_steps: int

    def rates(self) -> np.ndarray:
        return (self.lognorm - self.fsum) / self.n_steps


def run_d_family(spec: CocycleMapSpec, x0s, n_steps: int, eps=0.0, zs=None,
                 eps_norm: str = "real") -> DFamilyRun:
    """Batch products of the two-step family for many (x0, z, eps) jobs."""
    p = spec.params
    x0s = np.atleast_1d(np.asarray(x0s, dtype=float))
    nj = x0s.size
    zs = np.full(nj, spec.z, dtype=complex) if zs is None else np.broadcast_to(np.asarray(zs, complex), (nj,)).copy()
    epss = np.broadcast_to(np.asarray(eps, dtype=float), (nj,)).copy()
    r = spec.r if spec.variant == "perturbed" else None
    g, gh, _, f = odd_triples(p, r)
    mode = {"real": 0, "modulus": 1}[eps_norm]
    out = _d_family_kernel(x0s, zs, epss, int(n_steps), float(p.phi), p.lambda1, p.lambda1p,
                           g.as_array(), gh.as_array(), f.as_array(), spec.normalizes(), mode,
                           RESCALE_EVERY, QUARANTINE_TOL, SINGULAR_TOL)
    return DFamilyRun(*out, n_steps=int(n_steps))


@dataclass
class IterateResult:
    matrix: np.ndarray
    log_scale: float
    n_steps: int
    quarantine_hits: int = 0

    @property
    def product(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.matrix

    def log_norm(self) -> float:
        return self.log_scale + math.log(np.linalg.norm(self.matrix, 2))


def iterate(spec: CocycleMapSpec, x0: float, n_steps: int, eps: float = 0.0) -> IterateResult:
    """M^n(x0) = M(x0 + (n-1) phi) ... M(x0), returned as e^{log_scale} * matrix."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    xs = x0 + np.arange(n_steps) * spec.phi
    mats = evaluate_many(spec, xs, eps)
    quar = 0
    if spec.normalizes():
        r = spec.r if spec.variant == "perturbed" else None
        quar = int(np.sum(np.abs(abs_f_ext(spec.params, xs, eps, r)) < QUARANTINE_TOL))
    m, scale = _ordered_product(mats, RESCALE_EVERY)
    return IterateResult(m, float(scale), int(n_steps), quar)


def to_sl2r(m: Cocycle2x2) -> Cocycle2x2:
    if m.tag != "su11":
        raise ValueError("to_sl2r expects an su11-tagged matrix")
    out = P_SL2R @ m.m @ P_SL2R.conj().T
    return Cocycle2x2(out, "sl2r")


def sl2r_closed_form(p: WalkParameters, z: complex, x: float) -> np.ndarray:
    """Real form of S^+ written through Re/Im of z and g (divided by lambda1 f)."""
    g = complex(odd_triples(p)[0](x))
    _, _, _, f = odd_triples(p)
    fx = float(np.real(f(x)))
    l1p = p.lambda1p
    s11 = z.real + l1p * z.imag + l1p * g.real + g.imag
    s12 = -l1p * z.real + z.imag - g.real + l1p * g.imag
    s21 = -l1p * z.real - z.imag - g.real - l1p * g.imag
    s22 = z.real - l1p * z.imag + l1p * g.real - g.imag
    return np.array([[s11, s12], [s21, s22]]) / (p.lambda1 * fx)


def monotonicity_probe(p: WalkParameters, x: float, v, s_grid, h: float = 1e-6) -> np.ndarray:
    """d/ds arg(S^R_{e^{is}}(x) v) by central differences along s_grid."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)

    def ang(s):
        z = complex(math.cos(s), math.sin(s))
        m = to_sl2r(two_step(CocycleMapSpec(p, z), x)).m.real
        u = m @ v
        return math.atan2(u[1], u[0])

    out = []
    for s in np.atleast_1d(s_grid):
        da = ang(s + h) - ang(s - h)
        da = (da + math.pi) % (2 * math.pi) - math.pi
        out.append(da / (2 * h))
    return np.array(out)
