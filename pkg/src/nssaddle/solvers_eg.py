"""Extragradient and projected gradient descent-ascent for drifting saddles.

Both solvers play z_t at round t, query a gradient estimate of f_t (or of the
running average J_t in the static schedules) and move to z_{t+1}.  A closed
form proximal-point step for quadratics is included as a reference oracle.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .problems import PointPair, ProblemSequence, QuadraticSaddleInstance
from .zograd import EstimatorConfig, gradest

EG_REGIMES = (
    "static-th2a-light", "static-th2a-heavy",  # zeroth order
    "static-th2b-light", "static-th2b-heavy",  # first order
    "dynamic-th4-light", "dynamic-th4-heavy",
    "custom",
)
GDA_REGIMES = ("dynamic-th6", "custom")

# beyond this the iterates are treated as diverged
_BLOWUP = 1e100


class DivergenceError(FloatingPointError):
    def __init__(self, solver: str, t: int):
        super().__init__(f"{solver} iterates diverged at round {t}")
        self.t = t


def _ceil(v: float) -> int:
    # guard against 1/eta^2 landing one ulp above an integer
    r = round(v)
    return max(1, int(r) if abs(v - r) <= 1e-9 * max(1.0, abs(v)) else math.ceil(v))


# ---------------------------------------------------------------- schedules


@dataclass(frozen=True)
class StepPlan:
    """Constant step size and estimator settings for a whole run."""

    eta: float
    cfg: EstimatorConfig


@dataclass(frozen=True)
class EGSchedule:
    """Named step-size / batch-size presets for the extragradient solver.

    ``step_scale`` is the leading constant of eta (4 in the presets).
    ``order`` selects zeroth or first order for the dynamic and custom
    regimes; the static names already fix it (th2a zeroth, th2b first).
    """

    regime: str
    order: str = "first"
    alpha: float = 0.25
    beta: float = 0.25
    step_scale: float = 4.0
    eta: float | None = None  # custom only
    m: int | None = None  # custom only
    nu: float | None = None  # custom only
    mode: str | None = None  # custom only

    def __post_init__(self):
        if self.regime not in EG_REGIMES:
            raise ValueError(f"unknown EG regime {self.regime!r}")
        if self.regime.startswith("static-th2a"):
            object.__setattr__(self, "order", "zeroth")
        elif self.regime.startswith("static-th2b"):
            object.__setattr__(self, "order", "first")

    @property
    def heavy(self) -> bool:
        return self.regime.endswith("heavy")

    def plan(self, sequence: ProblemSequence) -> StepPlan:
        T, mu = sequence.horizon, sequence.constants.mu
        if self.regime == "custom":
            if self.eta is None or self.m is None:
                raise ValueError("custom schedule needs eta and m")
            nu = self.nu if self.nu is not None else 0.0
            return StepPlan(self.eta, EstimatorConfig(self.mode or "dynamic", self.order, self.m, self.m, nu, nu))
        if self.regime.startswith("static"):
            eta = self.step_scale * T ** (-self.alpha) / mu
            mode = "static"
        else:
            V = sequence.exact_VT()
            if V <= 0:
                raise ValueError("dynamic schedule needs a drifting sequence (V_T > 0)")
            eta = self.step_scale * T ** (-self.alpha) * V ** self.beta / mu
            mode = "dynamic"
        power = 4 if self.heavy else 2
        scale = eta ** power
        if self.order == "zeroth":
            m_x, m_y = _ceil((sequence.d_x + 5) / scale), _ceil((sequence.d_y + 5) / scale)
            nu_x, nu_y = scale * (sequence.d_x + 3) ** -1.5, scale * (sequence.d_y + 3) ** -1.5
            return StepPlan(eta, EstimatorConfig(mode, "zeroth", m_x, m_y, nu_x, nu_y))
        m = _ceil(1.0 / scale)
        return StepPlan(eta, EstimatorConfig(mode, "first", m, m))


@dataclass(frozen=True)
class GDASchedule:
    """eta = V_T^(1/4); zeroth order m = (d+6)T, nu = 1/((d+6)^(3/2) sqrt T); first order m = T."""

    regime: str = "dynamic-th6"
    order: str = "zeroth"
    eta: float | None = None
    m: int | None = None
    nu: float | None = None

    def __post_init__(self):
        if self.regime not in GDA_REGIMES:
            raise ValueError(f"unknown GDA regime {self.regime!r}")

    def plan(self, sequence: ProblemSequence) -> StepPlan:
        T = sequence.horizon
        if self.regime == "custom":
            if self.eta is None or self.m is None:
                raise ValueError("custom schedule needs eta and m")
            nu = self.nu if self.nu is not None else 0.0
            return StepPlan(self.eta, EstimatorConfig("dynamic", self.order, self.m, self.m, nu, nu))
        eta = sequence.exact_VT() ** 0.25
        if eta <= 0:
            raise ValueError("GDA schedule needs V_T > 0")
        if self.order == "zeroth":
            d_x, d_y = sequence.d_x, sequence.d_y
            cfg = EstimatorConfig("dynamic", "zeroth", (d_x + 6) * T, (d_y + 6) * T,
                                  1.0 / ((d_x + 6) ** 1.5 * math.sqrt(T)), 1.0 / ((d_y + 6) ** 1.5 * math.sqrt(T)))
        else:
            cfg = EstimatorConfig("dynamic", "first", T, T)
        return StepPlan(eta, cfg)


# --------------------------------------------------------------- trajectory


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Row t-1 of ``points`` is the point z_t played at round t."""

    solver: str
    schedule: str
    sequence: ProblemSequence
    points: np.ndarray
    final: np.ndarray
    oracle_calls: np.ndarray
    wall_ms: np.ndarray
    half_points: np.ndarray | None = None
    grads: np.ndarray | None = None
    half_grads: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.points.shape[0]

    def point(self, t: int) -> PointPair:
        return PointPair.from_vector(self.points[t - 1], self.sequence.d_x)

    @property
    def cumulative_calls(self) -> np.ndarray:
        return np.cumsum(self.oracle_calls)

    @property
    def total_calls(self) -> int:
        return int(self.oracle_calls.sum())

    @property
    def ledger(self):
        from .regret import build_ledger

        return build_ledger(self.sequence, self)


def _resolve_seed(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2 ** 63 - 1))
    return int(rng)


def _check_finite(v: np.ndarray, solver: str, t: int) -> None:
    if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > _BLOWUP:
        raise DivergenceError(solver, t)


# ------------------------------------------------------------- extragradient


def _require_unconstrained(sequence: ProblemSequence) -> None:
    if sequence.set_x.bounded or sequence.set_y.bounded:
        raise ValueError("eg-requires-unconstrained")


def eg_step(sequence: ProblemSequence, t: int, z: PointPair, eta: float, cfg: EstimatorConfig,
            rng: np.random.Generator):
    """One extragradient round: probe half step, then step from z with midpoint gradients.

    Returns ``(z_half, z_next, consumed, g, g_half)``.
    """
    _require_unconstrained(sequence)
    g = gradest(sequence, t, z, cfg, rng)
    with np.errstate(over="ignore", invalid="ignore"):
        half = np.concatenate([z.x - eta * g.g_x, z.y + eta * g.g_y])
    _check_finite(half, "EG", t)
    z_half = PointPair.from_vector(half, sequence.d_x)
    gh = gradest(sequence, t, z_half, cfg, rng)
    with np.errstate(over="ignore", invalid="ignore"):
        nxt = np.concatenate([z.x - eta * gh.g_x, z.y + eta * gh.g_y])
    _check_finite(nxt, "EG", t)
    return (z_half, PointPair.from_vector(nxt, sequence.d_x), g.samples_consumed + gh.samples_consumed,
            np.concatenate([g.g_x, g.g_y]), np.concatenate([gh.g_x, gh.g_y]))


def run_eg(sequence: ProblemSequence, schedule: EGSchedule, z0: PointPair, rng) -> Trajectory:
    """Extragradient over all rounds.  ``rng`` is a seed or a Generator to draw one from."""
    _require_unconstrained(sequence)
    seed = _resolve_seed(rng)
    plan = schedule.plan(sequence)
    T, d = sequence.horizon, sequence.d_x + sequence.d_y
    points, halves = np.empty((T, d)), np.empty((T, d))
    grads, half_grads = np.empty((T, d)), np.empty((T, d))
    calls, wall = np.empty(T, dtype=np.int64), np.empty(T)
    z = z0
    for t in range(1, T + 1):
        start = time.perf_counter()
        points[t - 1] = z.vector()
        z_half, z, consumed, g, gh = eg_step(sequence, t, z, plan.eta, plan.cfg, rngmod.substream(seed, t))
        halves[t - 1], grads[t - 1], half_grads[t - 1] = z_half.vector(), g, gh
        calls[t - 1] = consumed
        wall[t - 1] = 1e3 * (time.perf_counter() - start)
    return Trajectory("eg", schedule.regime, sequence, points, z.vector(), calls, wall, halves, grads, half_grads,
                      {"eta": plan.eta, "m_x": plan.cfg.m_x, "m_y": plan.cfg.m_y, "nu_x": plan.cfg.nu_x})


# -------------------------------------------------------------------- GDA


def gda_step(sequence: ProblemSequence, t: int, z: PointPair, eta: float, cfg: EstimatorConfig,
             rng: np.random.Generator):
    """Projected simultaneous step.  Returns ``(z_next, consumed, g)``."""
    if not sequence.bounded:
        raise ValueError("gda-requires-bounded-sets")
    g = gradest(sequence, t, z, cfg, rng)
    x = sequence.set_x.project(z.x - eta * g.g_x)
    y = sequence.set_y.project(z.y + eta * g.g_y)
    return PointPair(x, y), g.samples_consumed, np.concatenate([g.g_x, g.g_y])


def run_gda(sequence: ProblemSequence, schedule: GDASchedule, z0: PointPair, rng) -> Trajectory:
    if not sequence.bounded:
        raise ValueError("gda-requires-bounded-sets")
    seed = _resolve_seed(rng)
    plan = schedule.plan(sequence)
    T, d = sequence.horizon, sequence.d_x + sequence.d_y
    points, grads = np.empty((T, d)), np.empty((T, d))
    calls, wall = np.empty(T, dtype=np.int64), np.empty(T)
    z = z0
    for t in range(1, T + 1):
        start = time.perf_counter()
        points[t - 1] = z.vector()
        z, consumed, grads[t - 1] = gda_step(sequence, t, z, plan.eta, plan.cfg, rngmod.substream(seed, t))
        calls[t - 1] = consumed
        wall[t - 1] = 1e3 * (time.perf_counter() - start)
    return Trajectory("gda", schedule.regime, sequence, points, z.vector(), calls, wall, grads=grads,
                      extra={"eta": plan.eta, "m_x": plan.cfg.m_x, "m_y": plan.cfg.m_y, "nu_x": plan.cfg.nu_x})


# --------------------------------------------------------------- prox oracle


def saddle_operator(instance: QuadraticSaddleInstance) -> tuple[np.ndarray, np.ndarray]:
    """(M, r) with (grad_x f, -grad_y f) = M z - r."""
    d_x, d_y = instance.d_x, instance.d_y
    M = np.block([[instance.mu_x * np.eye(d_x), instance.C], [-instance.C.T, instance.mu_y * np.eye(d_y)]])
    r = np.concatenate([instance.mu_x * instance.a, instance.mu_y * instance.b])
    return M, r


def prox_step_quadratic(instance: QuadraticSaddleInstance, z: PointPair, eta: float) -> PointPair:
    """Implicit step z_hat = z - eta * (grad_x f, -grad_y f)(z_hat), solved exactly."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    M, r = saddle_operator(instance)
    v = z.vector()
    K = np.eye(v.size) + eta * M
    try:
        z_hat = np.linalg.solve(K, v + eta * r)
    except np.linalg.LinAlgError as exc:
        raise ValueError("proximal system is singular") from exc
    residual = np.linalg.norm(z_hat - (v - eta * (M @ z_hat - r)))
    if residual > 1e-10 * max(1.0, np.linalg.norm(v)):
        raise FloatingPointError(f"proximal solve residual {residual:.3e}")
    return PointPair.from_vector(z_hat, instance.d_x)


def eg_exact_step(instance: QuadraticSaddleInstance, z: PointPair, eta: float) -> PointPair:
    """Noiseless extragradient step on one instance (no oracle bookkeeping)."""
    M, r = saddle_operator(instance)
    v = z.vector()
    half = v - eta * (M @ v - r)
    return PointPair.from_vector(v - eta * (M @ half - r), instance.d_x)
