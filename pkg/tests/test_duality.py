import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpwalk.duality import (double_transform, dual_parameters, dual_transform, duality_residual, fourier_sum,
                            hann_weights, mixing_matrix, parseval_defect, select_eigenpairs, xi_grid)
from qpwalk.gecmv import StateVector, apply_walk, apply_walk_transpose, free_state
from qpwalk.model import GOLDEN, WalkParameters

P_LOC = WalkParameters(lambda1=0.9, lambda2=0.3, t=0.5, theta=0.21)


def test_mixing_matrix_is_an_involution():
    for t in (0.0, 0.3, -0.7):
        B = mixing_matrix(t)
        assert np.abs(B @ B - np.eye(2)).max() < 1e-14
        assert np.abs(B - B.T).max() == 0.0


def test_fourier_sum_against_loop():
    psi = free_state(-4, 5, 2)
    x = np.array([0.0, 0.13, 0.5, 0.91])
    ref = np.zeros((4, 2), complex)
    for i, xx in enumerate(x):
        for k, n in enumerate(psi.sites):
            ref[i] += psi.amps[k] * np.exp(2j * np.pi * n * xx)
    assert np.abs(fourier_sum(psi, x) - ref).max() < 1e-13


def test_dual_parameters_swap_couplings():
    d = dual_parameters(P_LOC, 0.4)
    assert (d.lambda1, d.lambda2, d.t, d.theta) == (P_LOC.lambda2, P_LOC.lambda1, P_LOC.t, 0.4)


def test_hann_weights():
    w = hann_weights(9)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.abs(w - w[::-1]).max() < 1e-16


def test_xi_grid_avoids_resonances():
    xs = xi_grid(32, GOLDEN)
    m = np.arange(-16, 17)
    d = np.abs(np.sin(np.pi * (2 * xs[:, None] + m[None, :] * GOLDEN)))
    assert xs.size == 32 and d.min() >= 1e-3


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_transform_intertwines_walk_and_dual_transpose(seed):
    # for any finitely supported psi: T(W psi) = W_dual^T T(psi) exactly
    rng = np.random.default_rng(seed)
    p = WalkParameters(lambda1=0.05 + 0.9 * rng.random(), lambda2=0.05 + 0.9 * rng.random(),
                       t=1.8 * rng.random() - 0.9, theta=rng.random())
    psi = free_state(-6, 6, seed)
    xi = rng.random()
    lhs = dual_transform(apply_walk(p, psi), p, xi, sites=(-20, 20))
    dp = dual_parameters(p, xi)
    rhs = apply_walk_transpose(dp, dual_transform(psi, p, xi, sites=(-21, 21)), lam=dp.lambda1)
    k = lhs.n0 - rhs.n0
    scale = np.abs(lhs.amps).max()
    assert np.abs(rhs.amps[k:k + len(lhs.amps)] - lhs.amps).max() < 1e-12 * max(1.0, scale)


def test_select_eigenpairs_are_eigenpairs():
    zs, states, (n0, n1) = select_eigenpairs(P_LOC, 64, 4)
    assert len(states) == 4 and n1 - n0 + 1 == 64
    for z, psi in zip(zs, states):
        r = apply_walk(P_LOC, psi).amps[1:-1] - z * psi.amps
        assert np.linalg.norm(r[2:-2]) < 1e-10


def test_duality_residual_small_window():
    rep = duality_residual(P_LOC, 256, n_eigpairs=4, xis=xi_grid(8, P_LOC.phi))
    assert rep.residuals.shape == (4, 8)
    assert np.all(rep.source_residuals < 1e-10)
    assert rep.median < 0.05
    assert rep.max >= rep.median


def test_double_transform_reflects():
    psi = free_state(-3, 4, 5)
    out = double_transform(psi, P_LOC, 0.37, 4000)
    ref = psi.amps[::-1]
    assert out.n0 == -psi.n1
    assert np.abs(out.amps - ref).max() < 1e-6


def test_parseval_per_site():
    psi = free_state(-5, 5, 9)
    psi = StateVector(psi.n0, psi.amps / psi.norm())
    for n in (0, 3, -7):
        assert parseval_defect(psi, P_LOC, n) < 1e-12
