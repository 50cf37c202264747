import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nssaddle import _accel
from nssaddle.problems import DriftSpec, PointPair, ProblemSequence, QuadraticSaddleInstance, eval_grad
from nssaddle.rng import substream
from nssaddle.zograd import (EstimatorConfig, estimate_instance, estimator_mse, estimator_norm2, gradest,
                             oracle_calls, zog)


def quad_1d(mu=1.0, a=0.0, c=0.0, sigma=0.0):
    return QuadraticSaddleInstance(np.array([a]), np.array([0.0]), mu, mu, np.array([[c]]), sigma)


def constant_instance(d=2):
    return QuadraticSaddleInstance(np.zeros(d), np.zeros(d), 0.0, 0.0, np.zeros((d, d)))


def pp(x, y):
    return PointPair(np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float)))


def drifting(T=20, sigma=0.0):
    return ProblemSequence.generate(T, 1.0, 0.5, np.array([[0.3, -0.2], [0.1, 0.4]]), [0.2, -0.1], [0.0, 0.3],
                                    DriftSpec("random-walk", step_scale=0.2), sigma=sigma, seed=3)


# ------------------------------------------------------------- examples


def test_constant_function_gives_zero_estimate(rng):
    est = zog(constant_instance(), pp([0.3, -1], [2, 0.5]), 50, 1e-2, 1e-2, rng)
    assert np.all(est.g_x == 0.0) and np.all(est.g_y == 0.0)


def test_first_order_noiseless_matches_gradient(rng):
    seq = drifting()
    z = pp([0.1, 0.2], [-0.3, 0.4])
    cfg = EstimatorConfig("dynamic", "first", 7, 7)
    est = gradest(seq, 5, z, cfg, rng)
    gx, gy = eval_grad(seq.instance(5), z, None)
    assert np.array_equal(est.g_x, gx) and np.array_equal(est.g_y, gy)
    assert est.samples_consumed == 7


def test_zeroth_order_monte_carlo_mean(rng):
    n = 100_000
    est = zog(quad_1d(), pp(1.0, 0.0), 1, 1e-3, 1e-3, rng)  # warm call
    draws = np.array([zog(quad_1d(), pp(1.0, 0.0), 1, 1e-3, 1e-3, rng).g_x[0] for _ in range(n)])
    se = draws.std(ddof=1) / np.sqrt(n)
    assert abs(draws.mean() - 1.0) <= 3 * se
    assert est.samples_consumed == 4


def test_zog_oracle_calls():
    est = zog(quad_1d(), pp(0.5, 0.5), 6, 0.1, 0.1, substream(0), m_y=9)
    assert est.samples_consumed == 2 * (6 + 9)


def test_errors():
    seq = drifting()
    cfg = EstimatorConfig("dynamic", "first", 1, 1)
    with pytest.raises(ValueError):
        gradest(seq, 0, pp([0, 0], [0, 0]), cfg, substream(0))
    with pytest.raises(ValueError):
        gradest(seq, 21, pp([0, 0], [0, 0]), cfg, substream(0))
    with pytest.raises(ValueError):
        EstimatorConfig("dynamic", "zeroth", 1, 1, 0.0, 0.1)
    with pytest.raises(ValueError):
        EstimatorConfig("dynamic", "zeroth", 1, 1, 0.1, -1.0)
    with pytest.raises(ValueError):
        EstimatorConfig("dynamic", "first", 0, 1)


# ------------------------------------------------------------ diagnostics


def test_mse_below_bound_linear_dominant(rng):
    inst = QuadraticSaddleInstance(np.zeros(2), np.zeros(2), 0.1, 0.1, np.array([[1.0, 0.5], [-0.5, 1.0]]))
    cfg = EstimatorConfig("dynamic", "zeroth", 1, 1, 1e-8, 1e-8)
    mx, my, bx, by = estimator_mse(inst, pp([0.5, -0.5], [0.3, 0.2]), cfg, 10_000, rng)
    assert mx <= bx and my <= by


def test_constant_function_diagnostics_vanish(rng):
    cfg = EstimatorConfig("dynamic", "zeroth", 3, 3, 0.1, 0.1)
    mx, my, bx, by = estimator_mse(constant_instance(), pp([1, 1], [1, 1]), cfg, 100, rng)
    assert mx == 0.0 and my == 0.0 and bx >= 0 and by >= 0
    sx, sy, _, _ = estimator_norm2(constant_instance(), pp([1, 1], [1, 1]), cfg, 100, rng)
    assert sx == 0.0 and sy == 0.0


def test_doubling_batch_halves_mse():
    inst = QuadraticSaddleInstance(np.zeros(3), np.zeros(3), 1.0, 1.0, 0.3 * np.eye(3))
    z = pp([1.0, -0.5, 0.2], [0.4, 0.0, -0.3])
    small = estimator_mse(inst, z, EstimatorConfig("dynamic", "zeroth", 4, 4, 1e-4, 1e-4), 20_000, substream(1))
    large = estimator_mse(inst, z, EstimatorConfig("dynamic", "zeroth", 8, 8, 1e-4, 1e-4), 20_000, substream(2))
    for k in (0, 1):
        assert abs(large[k] / small[k] - 0.5) <= 0.5 * 0.2


def test_second_moment_scales_with_batch():
    inst = quad_1d(c=0.5)
    z = pp(0.01, -0.01)
    one = estimator_norm2(inst, z, EstimatorConfig("dynamic", "zeroth", 1, 1, 1e-3, 1e-3), 20_000, substream(3))
    hundred = estimator_norm2(inst, z, EstimatorConfig("dynamic", "zeroth", 100, 100, 1e-3, 1e-3), 20_000,
                              substream(4))
    # E|g|^2 = |grad f|^2 + var/m, and the estimator is unbiased on quadratics
    g2 = float(np.sum(inst.grad(z)[0] ** 2))
    ratio = (hundred[0] - g2) / (one[0] - g2)
    assert abs(ratio - 0.01) <= 0.01 * 0.2


def test_second_moment_below_bound_near_saddle(rng):
    inst = quad_1d(c=0.5)
    sx, sy, bx, by = estimator_norm2(inst, pp(0.01, -0.01), EstimatorConfig("dynamic", "zeroth", 1, 1, 1e-3, 1e-3),
                                     10_000, rng)
    assert sx <= bx and sy <= by


# ------------------------------------------------------------- invariants


def test_unbiased_on_quadratic():
    inst = QuadraticSaddleInstance(np.array([0.3, -0.2]), np.array([0.1]), 1.5, 0.7, np.array([[0.4], [-0.6]]))
    z = pp([0.8, 0.1], [-0.5])
    tx, ty = inst.grad(z)
    cfg = EstimatorConfig("dynamic", "zeroth", 1, 1, 0.05, 0.05)
    rng = substream(11)
    n = 100_000
    gx = np.empty((n, 2))
    gy = np.empty((n, 1))
    for k in range(n):
        e = estimate_instance(inst, z, cfg, rng)
        gx[k], gy[k] = e.g_x, e.g_y
    for est, truth in ((gx, tx), (gy, ty)):
        se = est.std(axis=0, ddof=1) / np.sqrt(n)
        assert np.all(np.abs(est.mean(axis=0) - truth) <= 4 * se)


@given(st.sampled_from(["static", "dynamic"]), st.sampled_from(["zeroth", "first"]), st.integers(1, 20),
       st.integers(1, 9), st.integers(1, 9))
def test_samples_consumed_formula(mode, order, t, m_x, m_y):
    seq = drifting(T=20, sigma=0.3)
    cfg = EstimatorConfig(mode, order, m_x, m_y, 0.1, 0.1)
    est = gradest(seq, t, pp([0.1, 0.1], [0.2, -0.2]), cfg, substream(0, t))
    n = t if mode == "static" else 1
    expected = 2 * n * (m_x + m_y) if order == "zeroth" else n * max(m_x, m_y)
    assert est.samples_consumed == expected == oracle_calls(cfg, t)


@given(st.sampled_from(["static", "dynamic"]), st.sampled_from(["zeroth", "first"]), st.integers(0, 2 ** 31))
def test_same_seed_same_estimate(mode, order, seed):
    seq = drifting(sigma=0.4)
    cfg = EstimatorConfig(mode, order, 3, 2, 0.05, 0.05, independent_noise=True)
    z = pp([0.1, 0.1], [0.2, -0.2])
    a = gradest(seq, 9, z, cfg, substream(seed))
    b = gradest(seq, 9, z, cfg, substream(seed))
    assert a.g_x.tobytes() == b.g_x.tobytes() and a.g_y.tobytes() == b.g_y.tobytes()


def test_static_first_order_matches_average_gradient():
    seq = drifting(T=20)
    z = pp([0.7, -0.2], [0.1, 0.9])
    cfg = EstimatorConfig("static", "first", 4, 4)
    for t in (1, 7, 20):
        est = gradest(seq, t, z, cfg, substream(0))
        grads = [seq.instance(i).grad(z) for i in range(1, t + 1)]
        gx = np.mean([g[0] for g in grads], axis=0)
        gy = np.mean([g[1] for g in grads], axis=0)
        assert np.max(np.abs(est.g_x - gx)) <= 1e-12 and np.max(np.abs(est.g_y - gy)) <= 1e-12


# ---------------------------------------------------------- accelerated path


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not available")
@pytest.mark.parametrize("independent", [False, True])
def test_numba_and_numpy_kernels_agree(independent):
    r = np.random.default_rng(5)
    p = r.standard_normal(3)
    centers = r.standard_normal((4, 3))
    lin = r.standard_normal(3)
    consts = r.standard_normal(4)
    args = (p, centers, 0.7, lin, consts, 0.01, 50, 0.3, independent)
    a = _accel._two_point_sum_np(substream(8), *args)
    b = _accel._two_point_sum_nb(substream(8), *args)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10)


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not available")
def test_prefix_mean_kernels_agree():
    vals = np.random.default_rng(6).standard_normal((500, 3)) * 1e6 + 1.0
    assert np.array_equal(_accel._kahan_prefix_mean_np(vals), _accel._kahan_prefix_mean_nb(vals))


def test_prefix_mean_is_accurate():
    vals = np.full((10_000, 1), 0.1)
    out = _accel.kahan_prefix_mean(vals)
    assert np.all(np.abs(out - 0.1) <= 1e-16)


def test_env_flag_selects_numpy_path():
    env = dict(os.environ, NSSADDLE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from nssaddle import _accel; print(_accel.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
