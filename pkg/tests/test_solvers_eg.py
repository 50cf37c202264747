import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nssaddle.problems import DriftSpec, FeasibleSet, PointPair, ProblemSequence, QuadraticSaddleInstance, saddle_point
from nssaddle.rng import substream
from nssaddle.solvers_eg import (EGSchedule, GDASchedule, eg_exact_step, eg_step, gda_step, prox_step_quadratic,
                                 run_eg, run_gda)
from nssaddle.zograd import EstimatorConfig, mse_bound

FIRST = EstimatorConfig("dynamic", "first", 1, 1)


def pp(x, y):
    return PointPair(np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float)))


def static_seq(T=1, mu_x=1.0, mu_y=1.0, C=((0.5, -0.3), (0.2, 0.4)), a=(0.3, -0.1), b=(0.2, 0.5), **kw):
    return ProblemSequence.generate(T, mu_x, mu_y, np.array(C), a, b, DriftSpec("static"), **kw)


def random_instance(r, d=2):
    return QuadraticSaddleInstance(r.standard_normal(d), r.standard_normal(d), r.uniform(0.2, 2), r.uniform(0.2, 2),
                                   r.standard_normal((d, d)))


# ----------------------------------------------------------------- eg_step


def test_saddle_is_fixed_point():
    seq = static_seq()
    s = saddle_point(seq.instance(1))
    half, nxt, _, _, _ = eg_step(seq, 1, s, 0.3, FIRST, substream(0))
    assert np.linalg.norm(half.vector() - s.vector()) <= 1e-12
    assert np.linalg.norm(nxt.vector() - s.vector()) <= 1e-12


def test_bilinear_hand_case():
    mu = 1e-12
    seq = ProblemSequence.from_centers([[0.0]], [[0.0]], mu, mu, [[1.0]])
    half, nxt, consumed, _, _ = eg_step(seq, 1, pp(1.0, 1.0), 0.1, FIRST, substream(0))

    # straight-line recursion for f = x*y: grad_x = y, grad_y = x
    x, y, eta = 1.0, 1.0, 0.1
    xh, yh = x - eta * y, y + eta * x
    xn, yn = x - eta * yh, y + eta * xh

    assert half.x[0] == pytest.approx(0.9, abs=1e-10) and half.y[0] == pytest.approx(1.1, abs=1e-10)
    assert nxt.x[0] == pytest.approx(0.89, abs=1e-10) and nxt.y[0] == pytest.approx(1.09, abs=1e-10)
    assert (half.x[0], half.y[0], nxt.x[0], nxt.y[0]) == pytest.approx((xh, yh, xn, yn), abs=1e-10)
    assert consumed == 2


def test_single_step_contracts(rng):
    for _ in range(20):
        inst = random_instance(rng)
        seq = ProblemSequence.from_centers(inst.a[None], inst.b[None], inst.mu_x, inst.mu_y, inst.C)
        # gradient Lipschitz constant of the saddle operator
        M = np.block([[inst.mu_x * np.eye(2), inst.C], [-inst.C.T, inst.mu_y * np.eye(2)]])
        eta = 1 / (4 * np.linalg.norm(M, 2))
        s = saddle_point(inst).vector()
        z = pp(*np.split(s + rng.standard_normal(4), 2))
        _, nxt, _, _, _ = eg_step(seq, 1, z, eta, FIRST, substream(0))
        assert np.linalg.norm(nxt.vector() - s) < np.linalg.norm(z.vector() - s)


def test_eg_rejects_constrained_sets():
    box = FeasibleSet.box([-1, -1], [1, 1])
    seq = static_seq(set_x=box, set_y=box)
    with pytest.raises(ValueError, match="eg-requires-unconstrained"):
        eg_step(seq, 1, pp([0, 0], [0, 0]), 0.1, FIRST, substream(0))


# ------------------------------------------------------------------ run_eg


def test_single_round_run_matches_step():
    seq = static_seq(T=1, sigma=0.0)
    sched = EGSchedule("custom", eta=0.2, m=1)
    z0 = pp([1.0, -1.0], [0.5, 0.5])
    traj = run_eg(seq, sched, z0, 7)
    _, nxt, consumed, _, _ = eg_step(seq, 1, z0, 0.2, FIRST, substream(7, 1))
    assert np.array_equal(traj.final, nxt.vector()) and traj.total_calls == consumed
    assert np.array_equal(traj.points[0], z0.vector())


def test_static_run_reaches_saddle():
    seq = static_seq(T=2000)
    traj = run_eg(seq, EGSchedule("static-th2b-light"), pp([1.0, 1.0], [-1.0, 1.0]), 0)
    assert np.linalg.norm(traj.final - seq.saddles[0]) <= 1e-3
    # squared distances to the saddle shrink round over round once the run settles
    dist = np.sum((traj.points - seq.saddles[0]) ** 2, axis=1)
    assert np.all(np.diff(dist[100:]) <= 1e-15)
    assert traj.ledger.dspp() == pytest.approx(math.fsum(dist), rel=1e-12)


@pytest.mark.parametrize("regime", ["static-th2a-light", "static-th2b-heavy", "dynamic-th4-light"])
def test_oracle_count_is_sum_of_step_formula(regime):
    seq = ProblemSequence.generate(12, 1.0, 1.0, np.eye(2) * 0.3, [0.1, 0.2], [0.0, 0.1],
                                   DriftSpec("sinusoidal", amplitude=0.2, period=6), sigma=0.1)
    sched = EGSchedule(regime, step_scale=0.5)
    plan = sched.plan(seq)
    traj = run_eg(seq, sched, pp([0, 0], [0, 0]), 1)
    n = lambda t: t if plan.cfg.mode == "static" else 1  # noqa: E731
    if plan.cfg.order == "zeroth":
        per = [2 * 2 * n(t) * (plan.cfg.m_x + plan.cfg.m_y) for t in range(1, 13)]
    else:
        per = [2 * n(t) * max(plan.cfg.m_x, plan.cfg.m_y) for t in range(1, 13)]
    assert traj.oracle_calls.tolist() == per
    assert np.all(np.diff(traj.cumulative_calls) > 0)


def test_runs_are_reproducible():
    seq = static_seq(T=30, sigma=0.5)
    sched = EGSchedule("static-th2a-light", step_scale=1.0)
    a = run_eg(seq, sched, pp([0, 0], [0, 0]), 3)
    b = run_eg(seq, sched, pp([0, 0], [0, 0]), 3)
    assert a.points.tobytes() == b.points.tobytes()


# -------------------------------------------------------------------- GDA


def clamp_instance(c):
    box = FeasibleSet.box([-1], [1])
    # grad_x f = mu (x - a) + c y = c at x = a = 0.9, y = 1
    return ProblemSequence.from_centers([[0.9]], [[0.0]], 1.0, 1.0, [[c]], box, box)


def test_gda_projection_clamp():
    nxt, consumed, _ = gda_step(clamp_instance(5.0), 1, pp(0.9, 1.0), 0.1, FIRST, substream(0))
    assert nxt.x[0] == pytest.approx(0.4, abs=1e-15) and consumed == 1
    nxt, _, _ = gda_step(clamp_instance(-5.0), 1, pp(0.9, 1.0), 0.1, FIRST, substream(0))
    assert nxt.x[0] == 1.0


def test_gda_interior_saddle_is_fixed_point():
    box = FeasibleSet.box([-2, -2], [2, 2])
    seq = static_seq(set_x=box, set_y=box)
    s = saddle_point(seq.instance(1))
    nxt, _, _ = gda_step(seq, 1, s, 0.3, FIRST, substream(0))
    assert np.linalg.norm(nxt.vector() - s.vector()) <= 1e-12


def test_gda_requires_bounded_sets():
    with pytest.raises(ValueError):
        gda_step(static_seq(), 1, pp([0, 0], [0, 0]), 0.1, FIRST, substream(0))


@given(st.integers(0, 10_000))
def test_gda_iterates_stay_feasible(seed):
    box = FeasibleSet.box([-0.5, -0.5], [0.5, 0.5])
    ball = FeasibleSet.ball([0.0, 0.0], 0.7)
    seq = ProblemSequence.generate(40, 1.0, 1.0, np.array([[2.0, 0.0], [0.0, -2.0]]), [0.1, 0.1], [0.0, 0.0],
                                   DriftSpec("random-walk", step_scale=0.3), box, ball, sigma=2.0, seed=seed % 7)
    traj = run_gda(seq, GDASchedule("custom", order="first", eta=1.5, m=1), pp([0.5, 0.5], [0, 0]), seed)
    for t in range(1, 41):
        z = traj.point(t)
        assert box.contains(z.x, tol=1e-12) and ball.contains(z.y, tol=1e-12)


# -------------------------------------------------------------- schedules


@given(st.integers(16, 5000), st.floats(0.05, 50), st.sampled_from(["light", "heavy"]),
       st.sampled_from(["zeroth", "first"]))
def test_eg_dynamic_schedule_formulas(T, V, weight, order):
    seq = ProblemSequence.generate(T, 0.8, 1.3, np.zeros((2, 3)), [0, 0], [0, 0, 0], DriftSpec("sinusoidal"),
                                   v_budget=V)
    V_exact = seq.exact_VT()
    plan = EGSchedule(f"dynamic-th4-{weight}", order=order).plan(seq)
    eta = 4 * T ** -0.25 * V_exact ** 0.25 / 0.8
    assert plan.eta == pytest.approx(eta, rel=1e-12)
    s = eta ** (4 if weight == "heavy" else 2)
    if order == "zeroth":
        assert plan.cfg.m_x == max(1, math.ceil((2 + 5) / s - 1e-9 * (2 + 5) / s))
        assert plan.cfg.m_y == max(1, math.ceil((3 + 5) / s - 1e-9 * (3 + 5) / s))
        assert plan.cfg.nu_x == pytest.approx(s / 5 ** 1.5, rel=1e-12)
        assert plan.cfg.nu_y == pytest.approx(s / 6 ** 1.5, rel=1e-12)
    else:
        assert plan.cfg.m_x == plan.cfg.m_y == max(1, math.ceil(1 / s - 1e-9 / s))


@given(st.integers(4, 5000), st.sampled_from(["light", "heavy"]))
def test_eg_static_schedule_formulas(T, weight):
    seq = static_seq(T=T, mu_x=2.0, mu_y=0.5)
    plan = EGSchedule(f"static-th2b-{weight}").plan(seq)
    assert plan.eta == pytest.approx(4 * T ** -0.25 / 0.5, rel=1e-12)
    assert plan.cfg.mode == "static" and plan.cfg.order == "first"


@given(st.integers(4, 3000), st.floats(0.01, 20))
def test_gda_schedule_formulas(T, V):
    box = FeasibleSet.box([-50, -50], [50, 50])
    seq = ProblemSequence.generate(T, 1.0, 1.0, np.zeros((2, 2)), [0, 0], [0, 0], DriftSpec("sinusoidal"), box, box,
                                   v_budget=V)
    plan = GDASchedule().plan(seq)
    assert plan.eta == pytest.approx(seq.exact_VT() ** 0.25, rel=1e-12)
    assert plan.cfg.m_x == 8 * T and plan.cfg.m_y == 8 * T
    assert plan.cfg.nu_x == pytest.approx(1 / (8 ** 1.5 * math.sqrt(T)), rel=1e-12)
    first = GDASchedule(order="first").plan(seq)
    assert first.cfg.m_x == T


# ------------------------------------------------------------ prox oracle


def test_prox_fixes_saddle(rng):
    inst = random_instance(rng)
    s = saddle_point(inst)
    assert np.linalg.norm(prox_step_quadratic(inst, s, 0.7).vector() - s.vector()) <= 1e-12


def test_prox_contraction_rate(rng):
    for _ in range(100):
        inst = random_instance(rng)
        eta = rng.uniform(0.01, 2.0)
        s = saddle_point(inst).vector()
        z = pp(*np.split(s + 3 * rng.standard_normal(4), 2))
        zh = prox_step_quadratic(inst, z, eta).vector()
        rho = 1 / (1 + eta * min(inst.mu_x, inst.mu_y))
        assert np.sum((zh - s) ** 2) <= rho * np.sum((z.vector() - s) ** 2) * (1 + 1e-12)


def test_eg_tracks_prox_to_second_order(rng):
    inst = random_instance(rng)
    z = pp(*np.split(rng.standard_normal(4), 2))
    etas = np.array([0.1, 0.05, 0.025])
    gaps = np.array([np.linalg.norm(eg_exact_step(inst, z, e).vector() - prox_step_quadratic(inst, z, e).vector())
                     for e in etas])
    assert np.all(np.isfinite(gaps / etas ** 2))
    slope = np.polyfit(np.log(etas), np.log(gaps), 1)[0]
    assert slope >= 1.7


def test_zeroth_order_eg_stays_near_prox():
    inst = QuadraticSaddleInstance(np.array([0.2]), np.array([-0.1]), 1.0, 1.0, np.array([[0.5]]), sigma=0.3)
    seq = ProblemSequence.from_centers(inst.a[None], inst.b[None], 1.0, 1.0, inst.C, sigma=0.3)
    eta = 0.5
    m = math.ceil(eta ** -4)
    nu = eta ** 4 * 4 ** -1.5
    cfg = EstimatorConfig("dynamic", "zeroth", m, m, nu, nu)
    z = pp(0.8, -0.6)
    zp = prox_step_quadratic(inst, z, eta).vector()
    errs = []
    for k in range(4000):
        _, nxt, _, _, _ = eg_step(seq, 1, z, eta, cfg, substream(5, k))
        errs.append(np.sum((nxt.vector() - zp) ** 2))
    k = inst.constants
    bound_g = mse_bound(1, m, nu, k.L, k.L_g, 0.3) * 2  # both blocks
    assert np.mean(errs) <= 4 * (eta ** 2 + k.L_g ** 2 * eta ** 4) * bound_g + 2 * k.L_h ** 2 * eta ** 6
