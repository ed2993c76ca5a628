import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hsims.core import LabelField
from hsims.pdhg import (
    PdhgConfig,
    grad,
    grad_adjoint,
    grid_step,
    labeling_energy,
    project_simplex,
    project_unit_ball,
    prox_data,
    solve_labeling,
)
from oracles import simplex_projection_bruteforce


def test_grid_step():
    assert grid_step(16, 1) == pytest.approx(1 / 15)
    assert grid_step(3, 5) == 0.25
    assert grid_step(1, 1) == 1.0


def test_grad_constant_is_zero():
    assert not grad(np.full((4, 3, 2), 0.7), 0.5).any()


def test_grad_examples():
    u = np.array([[0.0, 1.0], [0.0, 0.0]])[..., None]
    g = grad(u, 0.5)
    assert g.shape == (2, 2, 1, 2)
    assert g[0, 0, 0, 0] == 2.0           # column direction
    assert g[0, 1, 0, 1] == -2.0          # row direction
    assert g[0, 1, 0, 0] == 0.0           # boundary
    assert g[1, 0, 0, 1] == 0.0


def test_adjoint_single_entry():
    h = 0.25
    p = np.zeros((3, 3, 1, 2))
    p[1, 1, 0, 0] = 1.0
    a = grad_adjoint(p, h)[..., 0]
    assert a[1, 1] == -1 / h and a[1, 2] == 1 / h
    assert np.count_nonzero(a) == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.integers(1, 4), st.integers(0, 2**31))
def test_adjoint_inner_product(height, width, k, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((height, width, k))
    p = rng.standard_normal((height, width, k, 2))
    h = grid_step(height, width)
    lhs = np.sum(grad(u, h) * p)
    rhs = np.sum(u * grad_adjoint(p, h))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_simplex_examples():
    np.testing.assert_allclose(project_simplex(np.array([0.5, 0.5])), [0.5, 0.5])
    np.testing.assert_allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    np.testing.assert_allclose(project_simplex(np.array([0.5, 0.5, 1.5])), [0.0, 0.0, 1.0])
    np.testing.assert_allclose(project_simplex(np.zeros(4)), np.full(4, 0.25))
    np.testing.assert_allclose(simplex_projection_bruteforce([0.5, 0.5, 1.5]), [0.0, 0.0, 1.0])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6).flatmap(lambda k: arrays(np.float64, k, elements=st.floats(-5, 5))))
def test_simplex_matches_bruteforce(v):
    x = project_simplex(v)
    assert np.all(x >= 0) and abs(x.sum() - 1) < 1e-12
    np.testing.assert_allclose(x, simplex_projection_bruteforce(v), atol=1e-9)


def test_simplex_is_idempotent_and_batched():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((5, 4, 3))
    x = project_simplex(v)
    np.testing.assert_allclose(project_simplex(x), x, atol=1e-15)
    for idx in np.ndindex(5, 4):
        np.testing.assert_allclose(x[idx], simplex_projection_bruteforce(v[idx]), atol=1e-12)


def test_unit_ball_examples():
    np.testing.assert_allclose(project_unit_ball(np.array([3.0, 4.0])), [0.6, 0.8])
    np.testing.assert_array_equal(project_unit_ball(np.array([0.3, -0.4])), [0.3, -0.4])
    np.testing.assert_array_equal(project_unit_ball(np.zeros(2)), [0.0, 0.0])


def test_prox_data_examples():
    u = np.full((1, 1, 2), 0.5)
    np.testing.assert_allclose(prox_data(u, np.array([[[1.0, 0.0]]]), 0.5, 1.0)[0, 0], [0.25, 0.75])
    np.testing.assert_allclose(prox_data(u, np.zeros((1, 1, 2)), 0.5, 1.0), u)
    with pytest.raises(ValueError):
        prox_data(u, np.zeros((1, 1, 2)), 0.5, 0.0)
    with pytest.raises(ValueError):
        prox_data(u, np.zeros((1, 2, 2)), 0.5, 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        PdhgConfig(lam=0.0)
    with pytest.raises(ValueError):
        PdhgConfig(lam=1.0, theta=1.5)
    tau, sigma = PdhgConfig(lam=1.0).steps(0.1)
    assert tau * sigma * 8 / 0.1**2 <= 1 + 1e-12


def test_tiny_lambda_gives_pointwise_argmin():
    rng = np.random.default_rng(4)
    f = rng.random((6, 5, 3))
    u0 = np.full(f.shape, 1 / 3)
    res = solve_labeling(u0, f, PdhgConfig(lam=1e-8))
    np.testing.assert_array_equal(res.u.argmax(axis=-1), f.argmin(axis=-1))


def test_symmetric_data_keeps_uniform():
    f = np.ones((4, 4, 3))
    u0 = np.full(f.shape, 1 / 3)
    res = solve_labeling(u0, f, PdhgConfig(lam=1.0))
    np.testing.assert_allclose(res.u, u0, atol=1e-12)
    assert res.converged


def _two_region_f(n=16):
    f = np.zeros((n, 1, 2))
    f[: n // 2, 0] = [0.0, 1.0]
    f[n // 2:, 0] = [0.6, 0.0]
    return f


def _bruteforce_binary(f, lam, h):
    """Exhaustive minimum over binary labelings of a column; jumps cost 2/h (one per class)."""
    n = f.shape[0]
    best, best_e = None, np.inf
    for bits in itertools.product((0, 1), repeat=n):
        lab = np.array(bits)
        e = f[np.arange(n), 0, lab].sum() / lam + 2.0 * np.count_nonzero(np.diff(lab)) / h
        if e < best_e:
            best, best_e = lab, e
    return best


@pytest.mark.parametrize("lam, max_iter", [(0.01, 5000), (10.0, 20000)])
def test_two_region_matches_bruteforce(lam, max_iter):
    f = _two_region_f()
    h = grid_step(16, 1)
    u0 = np.full(f.shape, 0.5)
    res = solve_labeling(u0, f, PdhgConfig(lam=lam, max_iter=max_iter, tol=1e-9))
    labels = res.u[:, 0].argmax(axis=-1)
    np.testing.assert_array_equal(labels, _bruteforce_binary(f, lam, h))
    if lam < 0.16:
        assert labels.tolist() == [0] * 8 + [1] * 8
    else:
        assert labels.tolist() == [0] * 16


def test_feasibility_and_energy_progress():
    rng = np.random.default_rng(9)
    f = rng.random((12, 10, 4))
    u0 = project_simplex(rng.random(f.shape))
    cfg = PdhgConfig(lam=1.0, max_iter=1000, tol=1e-12)
    h = grid_step(12, 10)
    energies = {}

    def check(m, u, p):
        assert LabelField(u).on_simplex()
        assert np.all(np.sum(p * p, axis=-1) <= 1 + 1e-12)
        if m % 100 == 0:
            energies[m] = labeling_energy(u, f, cfg.lam, h)

    solve_labeling(u0, f, cfg, callback=check)
    e = [energies[m] for m in sorted(energies)]
    assert e[-1] < labeling_energy(u0, f, cfg.lam, h)
    # not monotone per iteration, but decreasing on this checkpoint grid
    assert all(b <= a for a, b in zip(e, e[1:]))


def test_warm_start_shape_check():
    with pytest.raises(ValueError):
        solve_labeling(np.full((2, 2, 2), 0.5), np.zeros((2, 2, 2)), PdhgConfig(lam=1.0), p0=np.zeros((2, 2, 2)))
