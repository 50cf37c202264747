import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nssaddle.problems import DriftSpec, FeasibleSet, PointPair, ProblemSequence, QuadraticSaddleInstance, saddle_point
from nssaddle.regret import (RegretLedger, dsp_regret, dspf_regret, dspm_regret, dspp_regret, ledger_from_points,
                             merit, smoothed_saddle, spp_regret, ssp_regret)
from nssaddle.solvers_fw import fw_gap


def drifting(T=30, seed=0):
    return ProblemSequence.generate(T, 1.2, 0.8, np.array([[0.3, -0.1], [0.2, 0.4]]), [0.2, -0.1], [0.1, 0.3],
                                    DriftSpec("random-walk", step_scale=0.3), seed=seed)


def f_scalar(seq, t, z):
    # straight-line evaluation of f_t, independent of the vectorized ledger
    a, b = seq.centers_a[t - 1], seq.centers_b[t - 1]
    x, y = z[:seq.d_x], z[seq.d_x:]
    return (seq.mu_x / 2 * math.fsum((x - a) ** 2) - seq.mu_y / 2 * math.fsum((y - b) ** 2)
            + math.fsum((np.outer(x, y) * seq.C).ravel()))


def random_points(seq, rng, scale=1.0):
    return seq.saddles + scale * rng.standard_normal(seq.saddles.shape)


# ------------------------------------------------------------ comparators


def test_static_comparator_is_the_saddle():
    seq = ProblemSequence.generate(10, 1.0, 1.0, [[0.3]], [0.2], [0.1], DriftSpec("static"))
    for t in range(2, 12):
        assert np.allclose(smoothed_saddle(seq, t).saddle.vector(), seq.saddles[0], atol=1e-14)


def test_two_round_average():
    seq = ProblemSequence.from_centers([[0.0], [1.0], [5.0]], [[0.0], [0.0], [0.0]], 1.0, 1.0, [[0.0]])
    assert smoothed_saddle(seq, 3).saddle.x[0] == pytest.approx(0.5, abs=1e-15)


def test_smoothed_gradient_vanishes():
    seq = drifting()
    for t in (2, 10, 31):
        c = smoothed_saddle(seq, t)
        gx, gy = c.averaged.grad(c.saddle)
        assert np.linalg.norm(gx) + np.linalg.norm(gy) <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_smoothed_saddle_drift_bound(seed):
    box = FeasibleSet.box([-3, -3], [3, 3])
    seq = ProblemSequence.generate(60, 1.2, 0.8, np.array([[0.3, -0.1], [0.2, 0.4]]), [0.2, -0.1], [0.1, 0.3],
                                   DriftSpec("random-walk", step_scale=0.1), box, box, seed=seed)
    W = seq.smoothed_saddles
    k = seq.constants
    d = seq.d_x
    for t in range(1, 60):
        step = np.linalg.norm(W[t, :d] - W[t - 1, :d]) + np.linalg.norm(W[t, d:] - W[t - 1, d:])
        assert step <= 4 * k.L / (k.mu * t)


def test_comparator_index_range():
    with pytest.raises(ValueError):
        smoothed_saddle(drifting(T=5), 1)
    with pytest.raises(ValueError):
        smoothed_saddle(drifting(T=5), 7)


# ---------------------------------------------------------------- regrets


def test_pinned_static_trajectory_has_zero_regret():
    seq = ProblemSequence.generate(20, 1.0, 1.0, [[0.3]], [0.2], [0.1], DriftSpec("static"))
    led = ledger_from_points(seq, seq.saddles)
    for fn in (ssp_regret, spp_regret, dspp_regret, dspf_regret, dspm_regret, dsp_regret):
        assert fn(led, seq) == pytest.approx(0.0, abs=1e-24)


def test_dynamic_regrets_vanish_on_saddle_path():
    seq = drifting()
    led = ledger_from_points(seq, seq.saddles)
    assert led.dspp() == 0.0 and led.dspf() == 0.0 and led.dsp() == 0.0 and led.dspm() == 0.0


def test_single_round_collapse():
    seq = drifting(T=1)
    z = np.array([0.4, -0.2, 0.9, 0.1])
    led = ledger_from_points(seq, z[None])
    # J_1 = f_1, so the static comparator is the round-1 saddle
    gap = f_scalar(seq, 1, z) - f_scalar(seq, 1, seq.saddles[0])
    assert ssp_regret(led) == pytest.approx(abs(gap), rel=1e-12)
    assert dsp_regret(led) == pytest.approx(abs(gap), rel=1e-12)
    assert dspm_regret(led) == pytest.approx(gap ** 2, rel=1e-12)
    assert dspp_regret(led) == pytest.approx(np.sum((z - seq.saddles[0]) ** 2), rel=1e-12)
    assert spp_regret(led) == pytest.approx(np.sum((z - seq.smoothed_saddles[0]) ** 2), rel=1e-12)


def test_cancellation_case():
    n = np.zeros(2)
    led = RegretLedger(np.array([1.0, -1.0]), n, n, n, n, n, L=1.0)
    assert led.dsp() == 0.0 and led.dspf() == 2.0


@pytest.mark.parametrize("seed", range(5))
def test_resummation_oracle(seed, rng):
    seq = drifting(seed=seed)
    Z = random_points(seq, rng)
    led = ledger_from_points(seq, Z)
    T = seq.horizon
    vals = [f_scalar(seq, t, Z[t - 1]) for t in range(1, T + 1)]
    at_saddle = [f_scalar(seq, t, seq.saddles[t - 1]) for t in range(1, T + 1)]
    static = seq.smoothed_saddles[-1]
    at_static = [f_scalar(seq, t, static) for t in range(1, T + 1)]
    gaps = [v - s for v, s in zip(vals, at_saddle)]
    expect = {
        "SSP": abs(math.fsum(vals) - math.fsum(at_static)),
        "SPP": math.fsum(np.sum((Z - seq.smoothed_saddles) ** 2, axis=1)),
        "DSPP": math.fsum(np.sum((Z - seq.saddles) ** 2, axis=1)),
        "DSPF": math.fsum(abs(g) for g in gaps),
        "DSPM": math.fsum(g * g for g in gaps),
        "DSP": abs(math.fsum(gaps)),
    }
    got = led.all()
    for k, v in expect.items():
        assert got[k] == pytest.approx(v, rel=1e-12, abs=1e-12), k


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 3.0))
def test_chain_inequalities(seed, scale):
    box = FeasibleSet.box([-2, -2], [2, 2])
    seq = ProblemSequence.generate(25, 1.2, 0.8, np.array([[0.3, -0.1], [0.2, 0.4]]), [0.2, -0.1], [0.1, 0.3],
                                   DriftSpec("random-walk", step_scale=0.1), box, box, seed=seed % 50)
    r = np.random.default_rng(seed)
    Z = np.clip(seq.saddles + scale * r.standard_normal(seq.saddles.shape), -2, 2)
    led = ledger_from_points(seq, Z)
    led.check_chains()
    assert min(led.spp(), led.dspp(), led.dspf(), led.dspm()) >= 0
    assert led.dsp() <= led.dspf() * (1 + 1e-12)
    assert led.dspm() <= 2 * led.L ** 2 * led.dspp() * (1 + 1e-12)
    assert np.all(led.merit >= -1e-12)


def test_ledger_shape_check():
    with pytest.raises(ValueError):
        ledger_from_points(drifting(T=5), np.zeros((4, 4)))


# ----------------------------------------------------------------- merit


def test_merit_zero_at_saddle():
    inst = QuadraticSaddleInstance(np.array([0.3]), np.array([-0.2]), 1.0, 2.0, np.array([[0.5]]))
    s = saddle_point(inst)
    assert merit(inst, s, s)[2] == pytest.approx(0.0, abs=1e-15)


def test_merit_hand_case():
    inst = QuadraticSaddleInstance(np.array([0.0]), np.array([0.0]), 1.0, 1.0, np.array([[0.0]]))
    s = saddle_point(inst)
    wx, wy, w = merit(inst, PointPair(np.array([1.0]), np.array([2.0])), s)
    # f(x, y*) - f(x*, y*) = x^2/2, f(x*, y*) - f(x*, y) = y^2/2
    assert (wx, wy, w) == pytest.approx((0.5, 2.0, 2.5), abs=1e-15)


def test_merit_below_gap_on_random_points(rng):
    box = FeasibleSet.box([-1], [1])
    inst = QuadraticSaddleInstance(np.array([0.2]), np.array([-0.3]), 1.0, 1.5, np.array([[0.4]]), set_x=box,
                                   set_y=box)
    s = saddle_point(inst)
    for _ in range(100):
        z = PointPair(rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1))
        assert 0 <= merit(inst, z, s)[2] <= fw_gap(inst, z)[2] + 1e-12
