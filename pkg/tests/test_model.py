import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpwalk.model import (GOLDEN, ParameterError, WalkParameters, continued_fraction,
                          generate_coefficients, resonance_test, sample_f, sample_f_r, sample_g,
                          sample_g_hat, sample_g_r, uniform_index_sets)

lam = st.floats(0.01, 0.99)
tt = st.floats(-0.95, 0.95)


def mp_fg(l2, t, x, eps=0.0):
    """High-precision oracle from the cosine form (f) and the displayed exponential form (g)."""
    mp.mp.dps = 40
    l2p = mp.sqrt(1 - mp.mpf(l2) ** 2)
    k = -(1 + mp.mpf(t) ** 2)
    w = mp.exp(2j * mp.pi * (x + 1j * eps))
    f = (2 * t * l2 * mp.cos(2 * mp.pi * (x + 1j * eps)) + (t * t - 1) * l2p) / k
    g = (-t * t * l2 * w + l2 / w + 2 * t * l2p) / k
    return complex(f), complex(g)


def test_parameter_validation():
    with pytest.raises(ParameterError):
        WalkParameters(lambda1=1.0, lambda2=0.5)
    with pytest.raises(ParameterError):
        WalkParameters(lambda1=0.5, lambda2=0.0)
    with pytest.raises(ParameterError):
        WalkParameters(lambda1=0.5, lambda2=0.5, t=1.0)
    p = WalkParameters(lambda1=0.6, lambda2=0.8, theta=1.25)
    assert p.theta == pytest.approx(0.25)
    assert p.lambda1p == pytest.approx(0.8, abs=1e-15)
    assert WalkParameters(lambda1=0.5, lambda2=0.5, t=0.0).threshold == 1.0


def test_threshold_value():
    assert WalkParameters(lambda1=0.5, lambda2=0.5, t=0.5).threshold == pytest.approx(0.6, abs=1e-15)


def test_f_at_t0_is_constant():
    p = WalkParameters(lambda1=0.5, lambda2=0.37, t=0.0)
    assert sample_f(p, 0.3) == pytest.approx(math.sqrt(1 - 0.37 ** 2), abs=1e-15)


def test_f_hand_value():
    p = WalkParameters(lambda1=0.5, lambda2=0.5, t=0.5)
    assert sample_f(p, 0.0).real == pytest.approx(0.11962, abs=1e-5)


def test_g_hand_value():
    p = WalkParameters(lambda1=0.5, lambda2=0.8, t=0.0)
    assert abs(sample_g(p, 0.25) - 0.8j) < 1e-15


@settings(max_examples=50, deadline=None)
@given(lam, lam, tt)
def test_normalization_on_grid(l1, l2, t):
    p = WalkParameters(lambda1=l1, lambda2=l2, t=t)
    x = np.arange(1024) / 1024
    s = np.abs(sample_f(p, x)) ** 2 + np.abs(sample_g(p, x)) ** 2
    assert np.abs(s - 1).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(lam, tt, st.floats(0, 1), st.floats(-0.2, 0.2))
def test_f_g_against_high_precision(l2, t, x, eps):
    p = WalkParameters(lambda1=0.5, lambda2=l2, t=t)
    f, g = mp_fg(l2, t, x, eps)
    assert abs(sample_f(p, x, eps) - f) < 1e-13
    assert abs(sample_g(p, x, eps) - g) < 1e-13


@settings(max_examples=30, deadline=None)
@given(lam, tt, st.floats(-2, 2))
def test_f_real_even_periodic(l2, t, x):
    p = WalkParameters(lambda1=0.5, lambda2=l2, t=t)
    assert abs(complex(sample_f(p, x)).imag) < 1e-15
    assert abs(sample_f(p, -x) - sample_f(p, x)) < 1e-14
    assert abs(sample_g(p, x + 1) - sample_g(p, x)) < 1e-13


def test_g_hat_is_conjugate_on_real_line():
    p = WalkParameters(lambda1=0.5, lambda2=0.7, t=0.3)
    x = np.linspace(0, 1, 17)
    assert np.abs(sample_g_hat(p, x) - np.conj(sample_g(p, x))).max() < 1e-15


def test_perturbed_reduces_at_t_squared():
    p = WalkParameters(lambda1=0.5, lambda2=0.7, t=0.4)
    x = np.linspace(0, 1, 33)
    assert np.abs(sample_f_r(p, 0.16, x) - sample_f(p, x)).max() < 1e-14
    assert np.abs(sample_g_r(p, 0.16, x) - sample_g(p, x)).max() < 1e-14


def test_perturbed_trig_form_oracle():
    # trig form of the displayed f_r: ((r/t + t) l2 cos + i (r/t - t) l2 sin + (r - 1) l2') / k_r
    t, r, l2, x = 0.5, 0.2, 0.6, 0.0
    p = WalkParameters(lambda1=0.5, lambda2=l2, t=t)
    l2p = math.sqrt(1 - l2 * l2)
    kr = -math.sqrt(1 + r * r + r * r / t / t + t * t)
    c, s = math.cos(2 * math.pi * x), math.sin(2 * math.pi * x)
    f = ((r / t + t) * l2 * c + 1j * (r / t - t) * l2 * s + (r - 1) * l2p) / kr
    assert abs(sample_f_r(p, r, x) - f) < 1e-15
    for x in (0.13, 0.71):
        c, s = math.cos(2 * math.pi * x), math.sin(2 * math.pi * x)
        f = ((r / t + t) * l2 * c + 1j * (r / t - t) * l2 * s + (r - 1) * l2p) / kr
        assert abs(sample_f_r(p, r, x) - f) < 1e-14


@settings(max_examples=25, deadline=None)
@given(lam, st.floats(0.1, 0.9), st.floats(-0.05, 0.05))
def test_perturbed_normalization(l2, t, dr):
    p = WalkParameters(lambda1=0.5, lambda2=l2, t=t)
    r = t * t + dr
    x = np.arange(256) / 256
    s = np.abs(sample_f_r(p, r, x)) ** 2 + np.abs(sample_g_r(p, r, x)) ** 2
    assert np.abs(s - 1).max() < 1e-12


def test_perturbed_rejects_t0():
    with pytest.raises(ParameterError):
        sample_f_r(WalkParameters(lambda1=0.5, lambda2=0.5), 0.1, 0.0)


def test_coefficients_even_pairs_t0():
    c = generate_coefficients(WalkParameters(lambda1=0.6, lambda2=0.3), (-10, 11))
    for j in range(-10, 12, 2):
        assert c.alpha(j) == pytest.approx(0.8, abs=1e-15)
        assert c.rho(j) == pytest.approx(0.6, abs=1e-15)


def test_coefficients_odd_pairs():
    p = WalkParameters(lambda1=0.6, lambda2=0.3, t=0.2, theta=0.1)
    c = generate_coefficients(p, (-9, 9))
    for n in range(-4, 5):
        x = p.theta + n * p.phi
        assert c.alpha(2 * n - 1) == pytest.approx(complex(sample_g(p, x)), abs=1e-15)
        assert c.rho(2 * n - 1) == pytest.approx(np.conj(complex(sample_f(p, x))), abs=1e-15)


def test_coefficient_window_extension_and_shift():
    p = WalkParameters(lambda1=0.4, lambda2=0.7, t=0.3, theta=0.2)
    a = generate_coefficients(p, (-6, 9))
    b = generate_coefficients(p, (-6, 30))
    assert np.array_equal(a.alphas, b.alphas[:a.alphas.size])
    q = generate_coefficients(p.with_(theta=p.theta + p.phi), (-6, 9))
    for n in range(-2, 4):
        assert abs(q.alpha(2 * n - 1) - b.alpha(2 * (n + 1) - 1)) < 1e-13
    assert b.normalization_defect() < 1e-12


def test_zero_of_f_iff_above_threshold():
    x = np.arange(100000) / 100000
    for t in (0.3, 0.5, -0.4):
        thr = WalkParameters(lambda1=0.5, lambda2=0.5, t=t).threshold
        hi = WalkParameters(lambda1=0.5, lambda2=thr + 0.01, t=t)
        lo = WalkParameters(lambda1=0.5, lambda2=thr - 0.01, t=t)
        assert np.abs(sample_f(hi, x)).min() < 1e-3
        assert np.abs(sample_f(lo, x)).min() > 1e-3


def test_continued_fraction_golden():
    cf = continued_fraction(GOLDEN, 20)
    assert all(a == 1 for a in cf.partial_quotients)
    assert list(cf.convergent_denoms[:8]) == [1, 1, 2, 3, 5, 8, 13, 21]


def test_continued_fraction_rational_and_sqrt2():
    cf = continued_fraction(0.5, 10)
    assert list(cf.convergent_denoms) == [1, 2]
    cf = continued_fraction(math.sqrt(2) - 1, 12)
    assert all(a == 2 for a in cf.partial_quotients)


def test_convergent_error_bound():
    cf = continued_fraction(math.pi - 3, 5)
    p, q = cf.convergent_numers, cf.convergent_denoms
    for m in range(len(q) - 1):
        assert abs((math.pi - 3) - p[m] / q[m]) < 1 / (q[m] * q[m + 1])
    for m in range(2, len(q)):
        assert q[m] == cf.partial_quotients[m - 1] * q[m - 1] + q[m - 2]


def brute_force_witnesses(phi, tau, theta, N):
    out = []
    for m in range(-2 * N, 2 * N + 1):
        if m == 0:
            continue
        n = m / 2
        if abs(math.sin(2 * math.pi * (theta + n * phi))) < math.exp(-abs(n) ** (1 / (2 * tau))):
            out.append(n)
    return out


def test_resonance_matches_brute_force():
    cf = continued_fraction(GOLDEN, 40)
    for theta in (0.237, 0.0, 0.61):
        rep = resonance_test(cf, theta, 2000)
        ref = brute_force_witnesses(GOLDEN, cf.tau(), theta, 2000)
        assert sorted(w[0] if isinstance(w, tuple) else w for w in rep.witnesses) == ref
        assert rep.is_resonant_up_to_N == bool(ref)


def test_resonance_exact_zero_witness():
    cf = continued_fraction(GOLDEN, 40)
    rep = resonance_test(cf, 0.5 - GOLDEN / 2, 10)
    ns = [w[0] if isinstance(w, tuple) else w for w in rep.witnesses]
    assert 0.5 in ns
    assert 0.0 not in ns


def test_uniform_index_sets_size():
    cf = continued_fraction(GOLDEN, 40)
    I1, I2 = uniform_index_sets(cf, 256)
    assert len(set(I1) & set(I2)) == 0
    assert (len(I1) + len(I2)) % 2 == 0
