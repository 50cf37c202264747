"""Projection-free saddle solvers: linear minimization oracles, the offline
zeroth-order saddle-point Frank-Wolfe method and its online counterpart."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import rng as rngmod
from .problems import FeasibleSet, PointPair, ProblemConstants, ProblemSequence, QuadraticSaddleInstance, saddle_point
from .regret import merit
from .solvers_eg import Trajectory, _resolve_seed
from .zograd import EstimatorConfig, estimate_instance, gradest

log = logging.getLogger(__name__)

ONLINE_REGIMES = ("static-th3", "dynamic-th5", "custom")


# ---------------------------------------------------------------------- LMO


def lmo_solve(s: FeasibleSet, direction) -> np.ndarray:
    """argmin over the set of <p, direction>; zero components pick the lower bound."""
    g = np.asarray(direction, dtype=float)
    if g.size != s.dim:
        raise ValueError("direction dimension does not match the set")
    if s.kind == "box":
        return np.where(g < 0, s.upper, s.lower).astype(float)
    if s.kind == "ball":
        n = np.linalg.norm(g)
        return s.center.copy() if n == 0 else s.center - s.radius * g / n
    raise ValueError("lmo-undefined-unbounded")


def _lmo_pair(set_x, set_y, gx, gy) -> np.ndarray:
    # minimize over x along gx, maximize over y along gy
    return np.concatenate([lmo_solve(set_x, gx), lmo_solve(set_y, -gy)])


def fw_gap(instance: QuadraticSaddleInstance, z: PointPair) -> tuple[float, float, float]:
    """Exact Frank-Wolfe gap (gx_hat, gy_hat, g_hat) at z."""
    gx, gy = instance.grad(z)
    sx = lmo_solve(instance.set_x, gx)
    sy = lmo_solve(instance.set_y, -gy)
    g_x = -float(gx @ (sx - z.x))
    g_y = float(gy @ (sy - z.y))
    return g_x, g_y, g_x + g_y


# ---------------------------------------------------------------- constants


@dataclass(frozen=True)
class FWConstants:
    C0: float
    C1: float
    delta_mu: float
    rate: float  # min{C0^2 delta_mu^2 / (8 C1), C0/2}; the merit shrinks by (1 - rate) per step
    B_x: float
    B_y: float
    D_x: float
    D_y: float
    delta_x: float
    delta_y: float
    base: ProblemConstants

    def _term(self, block: str, m: float, nu: float) -> float:
        k = self.base
        if block == "x":
            d, L, Lg = k.d_x, k.L_x, k.L_gx
        else:
            d, L, Lg = k.d_y, k.L_y, k.L_gy
        return 4.0 * (d + 5) * (L * L + k.sigma ** 2) / m + 1.5 * nu * nu * Lg * Lg * (d + 6) ** 3

    def C2(self, m_x, m_y, nu_x, nu_y) -> float:
        return (self.D_x ** 2 * self._term("x", m_x, nu_x) + self.D_y ** 2 * self._term("y", m_y, nu_y)) / (4.0 * self.C1)

    def C3(self, m_x, m_y, nu_x, nu_y) -> float:
        return (self.C0 / (2 * self.D_x) * math.sqrt(self._term("x", m_x, nu_x))
                + self.C0 / (2 * self.D_y) * math.sqrt(self._term("y", m_y, nu_y)))

    def C4(self, m_x, m_y, nu_x, nu_y) -> float:
        return self._term("x", m_x, nu_x) + self._term("y", m_y, nu_y)

    @property
    def contraction(self) -> float:
        return 1.0 - self.rate

    def floor(self, m_x, m_y, nu_x, nu_y) -> float:
        """Stationary level (max{C2, C3} + C4) / rate of the adaptive bound."""
        c = max(self.C2(m_x, m_y, nu_x, nu_y), self.C3(m_x, m_y, nu_x, nu_y)) + self.C4(m_x, m_y, nu_x, nu_y)
        return c / self.rate

    def adaptive_envelope(self, w0: float, k, m_x, m_y, nu_x, nu_y):
        """(1 - rate)^k (w0 - floor) + floor."""
        fl = self.floor(m_x, m_y, nu_x, nu_y)
        return self.contraction ** np.asarray(k, dtype=float) * (w0 - fl) + fl


def compute_fw_constants(constants: ProblemConstants, set_x: FeasibleSet, set_y: FeasibleSet,
                         saddle: PointPair) -> FWConstants:
    if not (set_x.bounded and set_y.bounded):
        raise ValueError("lmo-undefined-unbounded")
    delta_x, delta_y = set_x.border_distance(saddle.x), set_y.border_distance(saddle.y)
    if not (delta_x > 0 and delta_y > 0):
        raise ValueError("saddle-not-interior")
    k = constants
    D_x, D_y = set_x.diameter(), set_y.diameter()
    delta_mu = math.sqrt(min(k.mu_x * delta_x ** 2, k.mu_y * delta_y ** 2))
    C0 = 1.0 - math.sqrt(2.0) / delta_mu * max(D_x * k.L_xy / math.sqrt(k.mu_y), D_y * k.L_yx / math.sqrt(k.mu_x))
    C1 = 0.5 * (k.L_g * D_x ** 2 + k.L_g * D_y ** 2)
    rate = min(C0 ** 2 * delta_mu ** 2 / (8.0 * C1), C0 / 2.0)
    B_x = max(math.sqrt(k.L_x ** 2 + k.sigma ** 2) / k.L_gx, 1.0)
    B_y = max(math.sqrt(k.L_y ** 2 + k.sigma ** 2) / k.L_gy, 1.0)
    return FWConstants(C0, C1, delta_mu, rate, B_x, B_y, D_x, D_y, delta_x, delta_y, k)


def instance_fw_constants(instance: QuadraticSaddleInstance) -> FWConstants:
    return compute_fw_constants(instance.constants, instance.set_x, instance.set_y, saddle_point(instance))


def scale_coupling_to_C0(instance: QuadraticSaddleInstance, target: float) -> QuadraticSaddleInstance:
    """Rescale the coupling matrix so that C0 equals ``target``."""
    if not 0 < target < 1:
        raise ValueError("target C0 must lie in (0, 1)")
    base = instance.C / np.linalg.norm(instance.C, 2)

    def with_scale(s):
        return QuadraticSaddleInstance(instance.a, instance.b, instance.mu_x, instance.mu_y, s * base,
                                       instance.sigma, instance.set_x, instance.set_y)

    def c0(s):
        try:
            return instance_fw_constants(with_scale(s)).C0 - target
        except ValueError:
            return -1.0 - target

    hi = 1e-3
    while c0(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("could not bracket the requested C0")
    return with_scale(brentq(c0, 0.0, hi, xtol=1e-15, rtol=1e-14))


# -------------------------------------------------------- step-size helpers


def nonadaptive_gammas(N: int) -> np.ndarray:
    k = np.arange(1, N + 1, dtype=float)
    return 6.0 / (5.0 + k)


def gamma_products(gammas: np.ndarray) -> np.ndarray:
    """Gamma_k = prod_{j<=k} (1 - gamma_j / 2)."""
    return np.cumprod(1.0 - np.asarray(gammas) / 2.0)


def output_distribution(gammas: np.ndarray) -> np.ndarray:
    """P_R(k) = gamma_k Gamma_N / (2 Gamma_k (1 - Gamma_N)), k = 1..N."""
    G = gamma_products(gammas)
    return gammas * G[-1] / (2.0 * G * (1.0 - G[-1]))


def eq8_batch(B: float, d: int, N: int) -> tuple[int, float]:
    """Batch m = B(d+5)N^2 and smoothing nu = sqrt(B / (2 N^2 (d+6)^3))."""
    return math.ceil(B * (d + 5) * N * N), math.sqrt(B / (2.0 * N * N * (d + 6) ** 3))


def eps_batch(B: float, d: int, eps: float) -> tuple[int, float]:
    """Batch m = B(d+5)/eps^2 and smoothing nu = sqrt(B / (2 eps^-2 (d+6)^3))."""
    return math.ceil(B * (d + 5) / eps ** 2), math.sqrt(B * eps ** 2 / (2.0 * (d + 6) ** 3))


# ----------------------------------------------------------- offline SP-FW


@dataclass(frozen=True, eq=False)
class FWRunReport:
    points: np.ndarray  # z_0..z_N
    merit: np.ndarray  # w_0..w_N
    gap_true: np.ndarray  # g_hat_0..g_hat_N
    gap_est: np.ndarray  # g_0..g_{N-1}
    gammas: np.ndarray  # gamma_1..gamma_N
    oracle_calls: np.ndarray
    constants: FWConstants
    step_mode: str
    R: int | None
    z_out: PointPair
    clamp_events: list = field(default_factory=list)
    est_errors: np.ndarray | None = None  # (|Delta_x|, |Delta_y|) per iteration
    p_r: np.ndarray | None = None


def spfw_offline(instance: QuadraticSaddleInstance, N: int, step_mode: str, m_rule="eq8", nu_rule="eq8",
                 rng=0, z0: PointPair | None = None, order: str = "zeroth", eps: float | None = None) -> FWRunReport:
    """Saddle-point Frank-Wolfe against one fixed stochastic function.

    ``m_rule`` / ``nu_rule``: "eq8" (scaled by N^2), "eps" (needs ``eps``),
    or explicit numbers.  ``order="first"`` swaps in stochastic gradients,
    which are exact when sigma is zero.
    """
    if step_mode not in ("non-adaptive", "adaptive"):
        raise ValueError("step_mode must be non-adaptive or adaptive")
    z_star = saddle_point(instance)
    fw = instance_fw_constants(instance)
    if not fw.C0 > 0:
        raise ValueError("theorem1-precondition-violated")
    seed = _resolve_seed(rng)
    d_x, d_y = instance.d_x, instance.d_y

    def rule(r, B, d):
        if r == "eq8":
            return eq8_batch(B, d, N)
        if r == "eps":
            if eps is None:
                raise ValueError("eps rule needs eps")
            return eps_batch(B, d, eps)
        return None

    mx_nu = rule(m_rule, fw.B_x, d_x)
    my_nu = rule(m_rule, fw.B_y, d_y)
    m_x = mx_nu[0] if mx_nu else int(m_rule)
    m_y = my_nu[0] if my_nu else int(m_rule)
    nx = rule(nu_rule, fw.B_x, d_x)
    ny = rule(nu_rule, fw.B_y, d_y)
    nu_x = nx[1] if nx else float(nu_rule)
    nu_y = ny[1] if ny else float(nu_rule)
    cfg = EstimatorConfig("dynamic", order, m_x, m_y, nu_x if order == "zeroth" else 0.0,
                          nu_y if order == "zeroth" else 0.0)

    z = z0 if z0 is not None else PointPair(lmo_solve(instance.set_x, np.ones(d_x)),
                                             lmo_solve(instance.set_y, np.ones(d_y)))
    points = [z.vector()]
    merits = [merit(instance, z, z_star)[2]]
    gaps = [fw_gap(instance, z)[2]]
    gap_est, gammas, calls, errs, clamps = [], [], [], [], []
    fixed = nonadaptive_gammas(N)
    for k in range(1, N + 1):
        est = estimate_instance(instance, z, cfg, rngmod.substream(seed, k))
        tx, ty = instance.grad(z)
        errs.append((np.linalg.norm(est.g_x - tx), np.linalg.norm(est.g_y - ty)))
        s = _lmo_pair(instance.set_x, instance.set_y, est.g_x, est.g_y)
        v = z.vector()
        g = -float(np.concatenate([est.g_x, -est.g_y]) @ (s - v))
        if step_mode == "non-adaptive":
            gamma = float(fixed[k - 1])
        elif g < 0:
            gamma = 0.0
            clamps.append(k)
            log.info("negative estimated gap %.3e at iteration %d; step clamped to 0", g, k)
        else:
            gamma = min(fw.C0 * g / (4.0 * fw.C1), 1.0)
        z = PointPair.from_vector((1.0 - gamma) * v + gamma * s, d_x)
        gap_est.append(g)
        gammas.append(gamma)
        calls.append(est.samples_consumed)
        points.append(z.vector())
        merits.append(merit(instance, z, z_star)[2])
        gaps.append(fw_gap(instance, z)[2])

    points_arr = np.array(points)
    R, p_r = None, None
    if step_mode == "non-adaptive":
        p_r = output_distribution(fixed)
        R = int(rngmod.substream(seed, N + 1, rngmod.SITE_SAMPLE_R).choice(N, p=p_r / p_r.sum())) + 1
        z_out = PointPair.from_vector(points_arr[R], d_x)
    else:
        z_out = z
    return FWRunReport(points_arr, np.array(merits), np.array(gaps), np.array(gap_est), np.array(gammas),
                       np.array(calls, dtype=np.int64), fw, step_mode, R, z_out, clamps, np.array(errs), p_r)


# ------------------------------------------------------------ online FW


@dataclass(frozen=True)
class OnlineFWSchedule:
    """static-th3: gamma_t = 1/sqrt(t), batches growing with t (averaged rounds);
    dynamic-th5: gamma = sqrt(max(2 W_T, V_T) / T), batches of size ~T."""

    regime: str
    order: str = "zeroth"
    gamma: float | None = None  # custom only
    m: int | None = None
    nu: float | None = None
    mode: str = "dynamic"

    def __post_init__(self):
        if self.regime not in ONLINE_REGIMES:
            raise ValueError(f"unknown online FW regime {self.regime!r}")

    def prepare(self, sequence: ProblemSequence):
        """Returns a function t -> (gamma_t, EstimatorConfig)."""
        d_x, d_y, T = sequence.d_x, sequence.d_y, sequence.horizon
        if self.regime == "static-th3":
            def at(t):
                if self.order == "zeroth":
                    nu = math.sqrt(2.0) / math.sqrt(t)
                    return 1.0 / math.sqrt(t), EstimatorConfig(
                        "static", "zeroth", 2 * (d_x + 5) * t, 2 * (d_y + 5) * t,
                        nu / (d_x + 3) ** 1.5, nu / (d_y + 3) ** 1.5)
                return 1.0 / math.sqrt(t), EstimatorConfig("static", "first", t, t)
            return at
        if self.regime == "dynamic-th5":
            gamma = math.sqrt(max(2.0 * sequence.measure_WT(), sequence.exact_VT()) / T)
            if gamma > 1.0:
                raise ValueError("gamma-exceeds-one")
            if gamma <= 0.0:
                raise ValueError("dynamic schedule needs a drifting sequence")
            if self.order == "zeroth":
                cfg = EstimatorConfig("dynamic", "zeroth", T * (d_x + 5), T * (d_y + 5),
                                      1.0 / math.sqrt(T * (d_x + 3) ** 3), 1.0 / math.sqrt(T * (d_y + 3) ** 3))
            else:
                cfg = EstimatorConfig("dynamic", "first", T, T)
            return lambda t: (gamma, cfg)
        if self.gamma is None or self.m is None:
            raise ValueError("custom schedule needs gamma and m")
        nu = self.nu if self.nu is not None else 0.0
        cfg = EstimatorConfig(self.mode, self.order, self.m, self.m, nu, nu)
        return lambda t: (self.gamma, cfg)


def fw_online_step(sequence: ProblemSequence, t: int, z: PointPair, gamma: float, cfg: EstimatorConfig,
                   rng: np.random.Generator):
    """z_{t+1} = (1 - gamma) z_t + gamma s_t.  Returns ``(z_next, consumed, g)``."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    est = gradest(sequence, t, z, cfg, rng)
    s = _lmo_pair(sequence.set_x, sequence.set_y, est.g_x, est.g_y)
    nxt = (1.0 - gamma) * z.vector() + gamma * s
    return PointPair.from_vector(nxt, sequence.d_x), est.samples_consumed, np.concatenate([est.g_x, est.g_y])


def run_fw_online(sequence: ProblemSequence, schedule: OnlineFWSchedule, z0: PointPair, rng) -> Trajectory:
    if not sequence.bounded:
        raise ValueError("lmo-undefined-unbounded")
    seed = _resolve_seed(rng)
    at = schedule.prepare(sequence)
    T, d = sequence.horizon, sequence.d_x + sequence.d_y
    points, grads = np.empty((T, d)), np.empty((T, d))
    calls, wall = np.empty(T, dtype=np.int64), np.empty(T)
    z = z0
    gamma_1 = None
    for t in range(1, T + 1):
        start = time.perf_counter()
        points[t - 1] = z.vector()
        gamma, cfg = at(t)
        gamma_1 = gamma if gamma_1 is None else gamma_1
        z, consumed, grads[t - 1] = fw_online_step(sequence, t, z, gamma, cfg, rngmod.substream(seed, t))
        calls[t - 1] = consumed
        wall[t - 1] = 1e3 * (time.perf_counter() - start)
    return Trajectory("fw", schedule.regime, sequence, points, z.vector(), calls, wall, grads=grads,
                      extra={"gamma_1": gamma_1})
