import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpwalk.gecmv import OPEN, cmv_window_operator
from qpwalk.model import GOLDEN, WalkParameters, continued_fraction
from qpwalk.spectrum import (NearEigenvalueError, boundary_terms, bulk_eigenpairs, centered_window,
                             char_poly, char_poly_fourier_mass, ecmv_operator, evenness_check,
                             green_function, hausdorff_distance, regularity_verdict, rho_growth,
                             spectral_samples, spectrum_union, truncation_spectrum, uniformity_measure,
                             uniformity_nodes)
from qpwalk.lyapunov import gamma_tilde

P0 = WalkParameters(lambda1=0.45, lambda2=0.55, t=0.5, theta=0.137)


def random_point(rng):
    return WalkParameters(lambda1=0.05 + 0.9 * rng.random(), lambda2=0.05 + 0.9 * rng.random(),
                          t=1.8 * rng.random() - 0.9, theta=rng.random())


def test_centered_window_even_aligned():
    for n in (8, 64, 511, 512):
        a, b = centered_window(n)
        assert a % 2 == 0 and b - a + 1 == n


def test_hausdorff_basics():
    A = np.exp(1j * np.array([0.1, 0.5]))
    assert hausdorff_distance(A, A) == 0.0
    assert hausdorff_distance([1.0], [1j]) == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        hausdorff_distance([], [1.0])


def test_truncation_spectrum_on_circle():
    w = truncation_spectrum(P0, 256)
    assert w.size == 256
    assert np.abs(np.abs(w) - 1).max() < 1e-10
    assert np.all(np.diff(np.mod(np.angle(w), 2 * np.pi)) >= 0)


def test_spectrum_union_and_samples():
    u = spectrum_union(P0, 128, 4)
    assert u.size == 512
    z = spectral_samples(P0, 8, 256)
    assert z.size == 8 and np.abs(np.abs(z) - 1).max() < 1e-14
    # samples lie on the union within the finite-size resolution
    assert max(np.abs(u - zz).min() for zz in z) < 0.05


def test_bulk_eigenpairs_drop_edge_states():
    w, V, (a, b) = bulk_eigenpairs(P0, 128)
    m = 16
    mass = np.abs(V) ** 2
    edge = mass[:m].sum(axis=0) + mass[-m:].sum(axis=0)
    assert np.all(edge < 0.3)
    assert w.size <= 128


def test_spectrum_continuity_in_r():
    p = WalkParameters(lambda1=0.4, lambda2=0.8, t=0.5)
    base = truncation_spectrum(p, 128)
    d = [hausdorff_distance(truncation_spectrum(p, 128, r=0.25 + e), base) for e in (0.05, 0.01, 1e-3)]
    assert d[-1] < d[0]
    assert d[-1] < 1e-2


# -- characteristic polynomials ------------------------------------------------------

def test_char_poly_routes_random_cases():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        p = random_point(rng)
        a = int(rng.integers(-30, 30))
        b = a + int(rng.integers(1, 64))
        bd = tuple(np.exp(2j * np.pi * rng.random(2)))
        z = (0.5 + rng.random()) * np.exp(2j * np.pi * rng.random())
        P1 = char_poly(p, (a, b), bd, [z]).values[0]
        P2 = char_poly(p, (a, b), bd, [z], route="direct_det").values[0]
        worst = max(worst, abs(P1 - P2) / max(abs(P2), 1e-300))
    assert worst < 1e-8


def test_char_poly_open_boundary_matches_det():
    p = WalkParameters(lambda1=0.3, lambda2=0.6, t=0.2, theta=0.4)
    z = np.exp(0.3j) * 1.1
    for bd in [(OPEN, 1.0), (1.0, OPEN)]:
        P1 = char_poly(p, (-5, 8), bd, [z]).values[0]
        P2 = char_poly(p, (-5, 8), bd, [z], route="direct_det").values[0]
        assert abs(P1 - P2) < 1e-10 * abs(P2)


def test_char_poly_vanishes_on_eigenvalues():
    w = np.linalg.eigvals(ecmv_operator(P0, (-6, 7)).dense())
    vals = char_poly(P0, (-6, 7), zs=w).values
    assert np.abs(vals).max() < 1e-10


def test_char_poly_rejects_bad_input():
    with pytest.raises(ValueError):
        char_poly(P0, (0, 5), (1.5, 1.0))
    with pytest.raises(ValueError):
        char_poly(P0, (0, 5), route="nope")
    assert char_poly(P0, (3, 2)).values[0] == 1


# -- Green's functions ------------------------------------------------------------------

def test_green_inverse_is_resolvent():
    z = np.exp(0.4j)
    gf = green_function(P0, (-8, 9), (1.0, np.exp(0.2j)), z)
    L, M = ecmv_operator(P0, (-8, 9), (1.0, np.exp(0.2j))).dense_factors()
    assert np.abs(gf.G @ (z * L.conj().T - M) - np.eye(18)).max() < 1e-12


@pytest.mark.parametrize("window", [(-8, 9), (-7, 9), (-8, 8)])
def test_green_cramer_matches_inverse(window):
    z = np.exp(0.4j)
    bd = (np.exp(0.9j), np.exp(-0.3j))
    gf = green_function(P0, window, bd, z)
    a, b = window
    ent = [(x, y) for x in range(a, b + 1) for y in range(a, b + 1)]
    cr = green_function(P0, window, bd, z, route="cramer", entries=ent)
    assert max(abs(abs(gf(x, y)) - cr[(x, y)]) for x, y in ent) < 1e-8


def test_green_guards():
    w = np.linalg.eigvals(ecmv_operator(P0, (-6, 7)).dense())
    with pytest.raises(NearEigenvalueError):
        green_function(P0, (-6, 7), z=w[3])
    with pytest.raises(ValueError):
        green_function(P0, (-6, 7), z=1.05 * np.exp(0.4j), route="cramer")
    with pytest.raises(ValueError):
        green_function(P0, (-6, 7), (OPEN, 1.0), z=np.exp(0.4j))


def test_boundary_to_interior_identity():
    A = -40
    E = ecmv_operator(P0, (A, 39)).dense()
    w, V = np.linalg.eig(E)
    i = int(np.argmax((np.abs(V[30:50]) ** 2).sum(axis=0)))
    z, v = w[i], V[:, i] / np.abs(V[:, i]).max()
    psi = lambda j: v[j - A]
    for a, b in [(-10, 9), (-9, 10), (-9, 9)]:
        for bd in [(1.0, 1.0), (np.exp(0.3j), np.exp(-1.1j))]:
            G = green_function(P0, (a, b), bd, z)
            ta, tb = boundary_terms(P0, psi, (a, b), bd, z)
            res = max(abs(psi(y) - G(y, a) * ta - G(y, b) * tb) for y in range(a, b + 1))
            assert res < 1e-7


# -- reflection, evenness, degree ----------------------------------------------------------

def test_evenness_and_reflection():
    rep = evenness_check(P0, 6, np.exp(0.7j), [0.1, 0.23, 0.61])
    assert rep.residual < 1e-8
    assert rep.reflection_spectral_gap < 1e-10
    assert rep.reflection_matrix_residual < 1e-12


def test_fourier_degree_bound():
    assert char_poly_fourier_mass(P0, 4, np.exp(0.7j), 512) < 1e-8


# -- regularity, uniformity, rho growth ----------------------------------------------------

def test_regularity_localized_point():
    p = WalkParameters(lambda1=0.3, lambda2=0.7, t=0.0)
    z = spectral_samples(p, 4, 256)[1]
    v = regularity_verdict(p, z, 0.5, 28, 0)
    assert v.is_regular and v.witness is not None
    with pytest.raises(ValueError):
        regularity_verdict(p, z, 0.5, 5, 0)


def test_uniformity_two_nodes_exact():
    # nodes cos = +-1: max over u in [-1, 1] of |u -+ 1| / 2 is 1
    assert uniformity_measure([0.0, 0.5]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        uniformity_measure([0.1, -0.1])


def test_uniformity_nodes_count():
    cf = continued_fraction(GOLDEN, 40)
    th = uniformity_nodes(P0, cf, 64)
    assert th.size % 2 == 0
    assert np.isfinite(uniformity_measure(th))


@pytest.mark.parametrize("l2", [0.3, 0.8])
def test_rho_growth_matches_gamma_tilde(l2):
    p = WalkParameters(lambda1=0.45, lambda2=l2, t=0.5, theta=0.1)
    # |rho| alternates between lambda1 (even) and |f| (odd): half the pair log-growth
    assert rho_growth(p, 200000) == pytest.approx(0.5 * gamma_tilde(p), abs=1e-3)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_window_truncation_spectra_gauge_free(seed):
    rng = np.random.default_rng(seed)
    p = random_point(rng)
    a = 2 * int(rng.integers(-10, 10))
    win = (a, a + 2 * int(rng.integers(2, 20)) - 1)
    w1 = np.linalg.eigvals(cmv_window_operator(p, win).dense())
    w2 = np.linalg.eigvals(ecmv_operator(p, win).dense())
    assert hausdorff_distance(w1, w2) < 1e-10
