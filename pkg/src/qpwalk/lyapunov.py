"""Lyapunov exponents, accelerations, closed forms and regime classification.

Exponents are per application of the two-step Szego matrix S_z^+ (two CMV
steps, one coin site).  Numerically S_z^+ is handled through its entire
numerator D_z: the normalising factor lambda1 |f| is accumulated separately.
For complexified phases the default normalisation uses |f| at the real phase,
so eps -> L(eps) differs from eps -> L(D_z, eps) by a constant; this keeps the
acceleration meaningful when f has zeros on the torus.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .cocycle import CocycleMapSpec, iterate, run_d_family
from .model import ParameterError, WalkParameters, k_r, sample_f, sample_f_r

QUAD_POINTS = 2 ** 14


class DomainError(ValueError):
    pass


class SingularityError(ArithmeticError):
    pass


@dataclass
class LyapunovEstimate:
    value: float
    n_steps: int
    n_phases: int
    eps: float
    std_error: float
    per_phase: np.ndarray = field(repr=False, default=None)
    quarantine_hits: int = 0


@dataclass
class AccelerationEstimate:
    omega: float
    eps_center: float
    eps_step: float
    quantization_residual: float
    le_low: float = float("nan")
    le_high: float = float("nan")


def _phases(n_phases, seed):
    return np.random.default_rng(seed).random(n_phases)


def _le_d_family(spec, eps, n_steps, x0s, eps_norm):
    run = run_d_family(spec, x0s, n_steps, eps=eps, eps_norm=eps_norm)
    if np.any(run.bad >= 0):
        i = int(np.argmax(run.bad >= 0))
        raise SingularityError(f"|f| below the singular guard at step {int(run.bad[i])} (phase {x0s[i]:.6f})")
    return run.rates(), int(run.nquar.sum())


def estimate_le(spec: CocycleMapSpec, eps: float = 0.0, n_steps: int = 200000, n_phases: int = 8,
                seed: int = 0, x0s=None, eps_norm: str = "real") -> LyapunovEstimate:
    """Birkhoff/phase average of (1/n) ln ||M^n(x0)|| over random x0."""
    if n_steps < 1000:
        raise ValueError("n_steps must be >= 1000")
    x0s = _phases(n_phases, seed) if x0s is None else np.asarray(x0s, dtype=float)
    if spec.d_family():
        vals, quar = _le_d_family(spec, eps, n_steps, x0s, eps_norm)
    else:
        vals = np.array([iterate(spec, x0, n_steps, eps).log_norm() / n_steps for x0 in x0s])
        quar = 0
    value = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    if se > 0.05 * max(abs(value), 0.01):
        warnings.warn(f"noisy Lyapunov estimate: {value:.4g} +- {se:.2g}", RuntimeWarning)
    return LyapunovEstimate(value, int(n_steps), len(x0s), float(eps), se, vals, quar)


def estimate_acceleration(spec: CocycleMapSpec, eps_center: float, eps_step: float,
                          n_steps: int = 200000, n_phases: int = 8, seed: int = 0,
                          eps_norm: str = "real") -> AccelerationEstimate:
    """Centered difference (L(c + h) - L(c - h)) / (4 pi h) with common phases for both ends.

    At a kink of L the centered difference averages the two one-sided
    slopes; ``acceleration_at`` places the stencil to the right of eta.
    """
    if not (1e-3 <= eps_step <= 5e-2):
        raise ValueError("eps_step must lie in [1e-3, 5e-2]")
    x0s = _phases(n_phases, seed)
    lo = estimate_le(spec, eps_center - eps_step, n_steps, x0s=x0s, eps_norm=eps_norm).value
    hi = estimate_le(spec, eps_center + eps_step, n_steps, x0s=x0s, eps_norm=eps_norm).value
    omega = (hi - lo) / (4 * math.pi * eps_step)
    return AccelerationEstimate(float(omega), float(eps_center), float(eps_step),
                                float(abs(omega - round(omega))), lo, hi)


def acceleration_at(spec: CocycleMapSpec, eta: float = 0.0, eps_step: float = 2e-3, **kw) -> AccelerationEstimate:
    """Right-derivative acceleration at eta, from the slope on [eta + h, eta + 3 h].

    L is piecewise linear in eps, so the slope just to the right of eta is the
    right derivative.  Staying off eta itself avoids the slow finite-n
    convergence of the exponent at critical points.
    """
    return estimate_acceleration(spec, eta + 2 * eps_step, eps_step, **kw)


# -- closed forms ---------------------------------------------------------------------

def _sq(p: WalkParameters, lp: float) -> float:
    rad = (1 + p.t ** 2) ** 2 * lp * lp - 4 * p.t ** 2
    if rad < -1e-14:
        raise DomainError("negative radicand: lambda is above the threshold")
    return math.sqrt(max(rad, 0.0))


def _num(p: WalkParameters, lp: float) -> float:
    return abs(1 - p.t ** 2) * lp + _sq(p, lp)


def closed_form_F(p: WalkParameters) -> float:
    """F(lambda1, lambda2); the exponent is max(F, 0) when lambda2 is below the threshold."""
    if p.lambda2 >= p.threshold:
        raise DomainError("closed_form_F needs lambda2 < threshold")
    # lambda1 above the threshold makes the first radicand negative; the
    # exponent is 0 there (see closed_form_le)
    return math.log(p.lambda2 * _num(p, p.lambda1p) / (p.lambda1 * _num(p, p.lambda2p)))


def closed_form_t0(p: WalkParameters) -> float:
    if p.t != 0:
        raise DomainError("closed_form_t0 needs t = 0")
    return max(math.log(p.lambda1p * p.lambda2 / (p.lambda1 * p.lambda2p)), 0.0)


def closed_form_singular(p: WalkParameters) -> float:
    if p.t == 0:
        raise DomainError("the singular region is empty at t = 0")
    if p.lambda2 < p.threshold:
        raise DomainError("closed_form_singular needs lambda2 >= threshold")
    if p.lambda1 >= p.threshold:
        return 0.0
    return math.log(_num(p, p.lambda1p) / (2 * abs(p.t) * p.lambda1))


def closed_form_perturbed(p: WalkParameters, r: float) -> float:
    """Lower-bound value of the r-perturbed exponent; tends to the singular formula as r -> t^2.

    Asymptote of L(D_r, eps) at eps = 0 minus the extended Jensen integral and ln lambda1,
    clamped at 0.
    """
    if p.t == 0:
        raise DomainError("perturbed family needs t != 0")
    t = abs(p.t)
    rad = (1 + r) ** 2 * p.lambda1p ** 2 - 4 * r
    if p.lambda1 < p.threshold and rad >= 0:
        c = max(t, abs(r) / t)
        val = math.log((abs(1 - r) * p.lambda1p + math.sqrt(rad)) / (2 * c * p.lambda1))
    else:
        val = math.log(math.sqrt(abs(r)) / t) if r < t * t else math.log(t / math.sqrt(abs(r)))
    return max(val, 0.0)


def closed_form_le(p: WalkParameters) -> float:
    """Exact exponent on the spectrum for any parameter point."""
    if p.t == 0:
        return closed_form_t0(p)
    if p.lambda2 >= p.threshold:
        return closed_form_singular(p)
    if p.lambda1 >= p.threshold:
        return 0.0  # lambda1 > lambda2 here: subcritical
    return max(closed_form_F(p), 0.0)


def gamma_tilde(p: WalkParameters) -> float:
    """Average of ln(lambda1 |f|) over the torus (two-step log growth of the rho product)."""
    if p.lambda2 < p.threshold:
        return math.log(p.lambda1 / (2 * (1 + p.t ** 2)) * _num(p, p.lambda2p))
    return math.log(abs(p.t) * p.lambda1 * p.lambda2 / (1 + p.t ** 2))


def predicted_regime(p: WalkParameters) -> str:
    """Regime on the spectrum implied by the exact exponent formulas."""
    thr = p.threshold
    if p.lambda1 >= thr and p.lambda2 >= thr:
        return "critical"
    if p.lambda1 == p.lambda2:
        return "critical"
    if p.lambda1 < p.lambda2:
        return "supercritical"
    return "subcritical"


SPECTRAL_TYPE = {"supercritical": "pure_point", "critical": "singular_continuous",
                 "subcritical": "absolutely_continuous", "uniformly_hyperbolic_suspect": None,
                 "inconclusive": None}


# -- Jensen integrals ---------------------------------------------------------------------

@dataclass
class JensenValue:
    quadrature: float
    closed_form: float
    branch_ok: bool = True

    @property
    def error(self) -> float:
        return abs(self.quadrature - self.closed_form)


def eps0(p: WalkParameters) -> float:
    """Half-width of the strip where f has no zeros (|t| used throughout)."""
    if p.lambda2 >= p.threshold:
        raise DomainError("f has zeros on the torus")
    if p.t == 0:
        return math.inf
    return math.log(_num(p, p.lambda2p) / (2 * abs(p.t) * p.lambda2)) / (2 * math.pi)


def eps0_r(p: WalkParameters, r: float) -> float:
    return math.log(math.sqrt(abs(r)) / abs(p.t)) / (2 * math.pi)


def _grid(n=QUAD_POINTS):
    return np.arange(n) / n


def jensen_integral_f(p: WalkParameters, eps: float = 0.0, n: int = QUAD_POINTS) -> JensenValue:
    if p.lambda2 >= p.threshold:
        raise DomainError("jensen_integral_f needs lambda2 < threshold")
    if abs(eps) >= eps0(p):
        raise DomainError(f"|eps| = {abs(eps)} outside the strip {eps0(p)}")
    q = float(np.mean(np.log(np.abs(sample_f(p, _grid(n), eps)))))
    closed = math.log(_num(p, p.lambda2p) / 2) - math.log(-p.k)
    return JensenValue(q, closed)


def jensen_integral_fr_ext(p: WalkParameters, r: float, eps: float = 0.0, n: int = QUAD_POINTS) -> JensenValue:
    """Integral of ln |f_r|_ext(x + i eps) with |f_r|_ext = sqrt(f_r(x + i eps) conj f_r(x - i eps))."""
    if p.t == 0:
        raise DomainError("perturbed family needs t != 0")
    if p.lambda2 < p.threshold:
        raise DomainError("the extended integral formula concerns lambda2 >= threshold")
    e0 = eps0_r(p, r)
    if abs(eps) > abs(e0) + 1e-15:
        raise DomainError(f"|eps| = {abs(eps)} outside the strip {abs(e0)}")
    x = _grid(n)
    v = sample_f_r(p, r, x, eps) * np.conj(sample_f_r(p, r, x, -eps))
    if np.min(np.abs(v)) == 0:
        raise SingularityError("f_r vanishes on the quadrature grid")
    # continuous square-root branch: half the unwrapped argument
    half = 0.5 * np.unwrap(np.angle(v))
    branch_ok = bool(np.max(np.abs(np.diff(half))) < math.pi / 2)
    q = float(np.mean(0.5 * np.log(np.abs(v))))
    kk = -k_r(p, r)
    if e0 < 0:
        closed = math.log(abs(p.t) * p.lambda2) - math.log(kk)
    else:
        closed = math.log(abs(r / p.t) * p.lambda2) - math.log(kk)
    return JensenValue(q, closed, branch_ok)


# -- classification ----------------------------------------------------------------------

@dataclass
class Budget:
    n_steps: int = 200000
    n_phases: int = 8
    eps_step: float = 2e-3
    le_threshold: float = 0.02
    n_z: int = 16
    size: int = 512
    seed: int = 0


@dataclass
class RegimeReport:
    parameters: dict
    regime: str
    predicted_spectral_type: str | None
    numeric_LE: float
    LE_err: float
    closed_form_LE: float | None
    acceleration: float
    per_z: list = field(default_factory=list)
    inconclusive: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _classify_one(le, se, omega, closed, thr):
    if le > thr:
        # positive exponent with zero acceleration is uniform hyperbolicity: z is off the spectrum
        if round(omega) == 0 or (closed is not None and le - closed > max(0.1, 5 * se)):
            return "uniformly_hyperbolic_suspect"
        return "supercritical"
    w = round(omega)
    if w >= 1:
        return "critical"
    if abs(omega) <= 0.5:
        return "subcritical"
    return "inconclusive"


def classify_regime(p: WalkParameters, z=None, budget: Budget | None = None) -> RegimeReport:
    """Regime at one or several spectral parameters z (default: samples of the truncation spectrum)."""
    from .spectrum import spectral_samples

    budget = budget or Budget()
    zs = spectral_samples(p, budget.n_z, budget.size) if z is None else np.atleast_1d(np.asarray(z, dtype=complex))
    try:
        closed = closed_form_le(p)
    except DomainError:
        closed = None
    x0s = _phases(budget.n_phases, budget.seed)
    h = budget.eps_step
    spec = CocycleMapSpec(p, 1.0)
    nz = zs.size
    # one batched kernel call over (z, eps in {0, h, 3h}, phase)
    Z = np.repeat(zs, 3 * x0s.size)
    E = np.tile(np.repeat([0.0, h, 3 * h], x0s.size), nz)
    X = np.tile(x0s, 3 * nz)
    run = run_d_family(spec, X, budget.n_steps, eps=E, zs=Z)
    if np.any(run.bad >= 0):
        raise SingularityError("orbit hit a zero of f")
    rates = run.rates().reshape(nz, 3, x0s.size)
    per_z = []
    for i in range(nz):
        le0 = rates[i, 0]
        le = float(le0.mean())
        se = float(le0.std(ddof=1) / math.sqrt(le0.size)) if le0.size > 1 else 0.0
        omega = float((rates[i, 2].mean() - rates[i, 1].mean()) / (4 * math.pi * h))
        reg = _classify_one(le, se, omega, closed, budget.le_threshold)
        straddle = abs(le - budget.le_threshold) < 3 * se
        per_z.append({"z_arg": float(np.mod(np.angle(zs[i]), 2 * np.pi)), "LE": le, "LE_err": se,
                      "omega": omega, "regime": reg, "straddle": bool(straddle)})
    votes = {}
    for r in per_z:
        if r["regime"] not in ("uniformly_hyperbolic_suspect", "inconclusive"):
            votes[r["regime"]] = votes.get(r["regime"], 0) + 1
    regime = max(votes, key=votes.get) if votes else "inconclusive"
    chosen = [r for r in per_z if r["regime"] == regime] or per_z
    le = float(np.median([r["LE"] for r in chosen]))
    se = float(np.median([r["LE_err"] for r in chosen]))
    om = float(np.median([r["omega"] for r in chosen]))
    inconclusive = regime == "inconclusive" or all(r["straddle"] for r in chosen)
    return RegimeReport(p.as_dict(), regime, SPECTRAL_TYPE.get(regime), le, se, closed, om, per_z, inconclusive)
