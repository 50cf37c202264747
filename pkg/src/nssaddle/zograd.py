"""Mini-batch gradient estimators for the saddle sequence.

Four modes: the estimate targets either the current round's function
(``dynamic``) or the running average J_t of all rounds so far (``static``),
and it is built from stochastic gradients (``first``) or from Gaussian
two-point value differences (``zeroth``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .problems import PointPair, ProblemSequence, QuadraticSaddleInstance

MODES = ("static", "dynamic")
ORDERS = ("zeroth", "first")


@dataclass(frozen=True)
class EstimatorConfig:
    mode: str
    order: str
    m_x: int
    m_y: int
    nu_x: float = 0.0
    nu_y: float = 0.0
    independent_noise: bool = False  # draw separate value noise for the two points of a pair

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        for name in ("m_x", "m_y"):
            m = getattr(self, name)
            if int(m) != m or m < 1:
                raise ValueError(f"{name} must be a positive integer")
            object.__setattr__(self, name, int(m))
        if self.order == "zeroth" and not (self.nu_x > 0 and self.nu_y > 0):
            raise ValueError("zeroth-order estimation needs nu_x, nu_y > 0")


@dataclass(frozen=True)
class GradEstimate:
    g_x: np.ndarray
    g_y: np.ndarray
    samples_consumed: int
    t: int
    mode: str
    order: str


def oracle_calls(cfg: EstimatorConfig, t: int) -> int:
    """Oracle calls used by one estimate at round t.

    A first-order call returns both partial gradients, so the larger block
    batch sets the count; a zeroth-order pair costs two value calls.
    """
    n_funcs = t if cfg.mode == "static" else 1
    if cfg.order == "zeroth":
        return 2 * n_funcs * (cfg.m_x + cfg.m_y)
    return n_funcs * max(cfg.m_x, cfg.m_y)


def _estimate(A, B, mu_x, mu_y, C, sigma, z: PointPair, cfg: EstimatorConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """Average estimate over the functions whose centers are the rows of A, B."""
    n = A.shape[0]
    x, y = z.x, z.y
    if cfg.order == "first":
        # mean of n*m i.i.d. N(0, sigma^2/d) draws, drawn as one Gaussian
        gx = mu_x * (x - A.mean(axis=0)) + C @ y
        gy = -mu_y * (y - B.mean(axis=0)) + C.T @ x
        if sigma > 0:
            gx = gx + sigma / math.sqrt(x.size * n * cfg.m_x) * rng.standard_normal(x.size)
            gy = gy + sigma / math.sqrt(y.size * n * cfg.m_y) * rng.standard_normal(y.size)
        return gx, gy
    # x block: F_i(q, y) = (mu_x/2)|q - a_i|^2 + q.(C y) - (mu_y/2)|y - b_i|^2
    cx = -0.5 * mu_y * np.sum((y - B) ** 2, axis=1)
    sx = _accel.two_point_sum(rng, x, A, 0.5 * mu_x, C @ y, cx, float(cfg.nu_x), cfg.m_x,
                              float(sigma), bool(cfg.independent_noise))
    # y block: F_i(x, q) = -(mu_y/2)|q - b_i|^2 + q.(C^T x) + (mu_x/2)|x - a_i|^2
    cy = 0.5 * mu_x * np.sum((x - A) ** 2, axis=1)
    sy = _accel.two_point_sum(rng, y, B, -0.5 * mu_y, C.T @ x, cy, float(cfg.nu_y), cfg.m_y,
                              float(sigma), bool(cfg.independent_noise))
    return sx / (n * cfg.m_x), sy / (n * cfg.m_y)


def gradest(sequence: ProblemSequence, t: int, z: PointPair, cfg: EstimatorConfig,
            rng: np.random.Generator) -> GradEstimate:
    """Estimate (grad_x, grad_y) of f_t (dynamic) or of J_t (static) at z."""
    if not 1 <= t <= sequence.horizon:
        raise ValueError(f"round t={t} outside 1..{sequence.horizon}")
    if z.x.size != sequence.d_x or z.y.size != sequence.d_y:
        raise ValueError("point dimensions do not match the sequence")
    if cfg.mode == "static":
        A, B = sequence.centers_a[:t], sequence.centers_b[:t]
        if cfg.order == "first":
            a_bar, b_bar = sequence.averaged_centers(t)  # compensated prefix means
            A, B = a_bar[None], b_bar[None]
            gx, gy = _first_order_scaled(A, B, sequence, z, cfg, rng, t)
            return GradEstimate(gx, gy, oracle_calls(cfg, t), t, cfg.mode, cfg.order)
    else:
        A, B = sequence.centers_a[t - 1:t], sequence.centers_b[t - 1:t]
    gx, gy = _estimate(np.ascontiguousarray(A), np.ascontiguousarray(B), sequence.mu_x, sequence.mu_y,
                       sequence.C, sequence.sigma, z, cfg, rng)
    return GradEstimate(gx, gy, oracle_calls(cfg, t), t, cfg.mode, cfg.order)


def _first_order_scaled(A, B, sequence, z, cfg, rng, t):
    # the averaged gradient over t rounds with batch m each has noise variance sigma^2/(d t m)
    gx = sequence.mu_x * (z.x - A[0]) + sequence.C @ z.y
    gy = -sequence.mu_y * (z.y - B[0]) + sequence.C.T @ z.x
    if sequence.sigma > 0:
        gx = gx + sequence.sigma / math.sqrt(z.x.size * t * cfg.m_x) * rng.standard_normal(z.x.size)
        gy = gy + sequence.sigma / math.sqrt(z.y.size * t * cfg.m_y) * rng.standard_normal(z.y.size)
    return gx, gy


def estimate_instance(instance: QuadraticSaddleInstance, z: PointPair, cfg: EstimatorConfig,
                      rng: np.random.Generator) -> GradEstimate:
    """Single-function estimate (the mode field is ignored)."""
    instance._check(z)
    gx, gy = _estimate(instance.a[None], instance.b[None], instance.mu_x, instance.mu_y, instance.C,
                       instance.sigma, z, cfg, rng)
    return GradEstimate(gx, gy, oracle_calls(cfg, 1), 1, "dynamic", cfg.order)


def zog(instance: QuadraticSaddleInstance, z: PointPair, m: int, nu_x: float, nu_y: float,
        rng: np.random.Generator, m_y: int | None = None) -> GradEstimate:
    """Zeroth-order estimate against one fixed function."""
    cfg = EstimatorConfig("dynamic", "zeroth", m, m if m_y is None else m_y, nu_x, nu_y)
    return estimate_instance(instance, z, cfg, rng)


# ------------------------------------------------------------- diagnostics


def mse_bound(d: int, m: int, nu: float, L: float, L_g: float, sigma: float) -> float:
    """2(d+5)(L^2+sigma^2)/m + (3 nu^2/2) L_g^2 (d+3)^3."""
    return 2.0 * (d + 5) * (L * L + sigma * sigma) / m + 1.5 * nu * nu * L_g * L_g * (d + 3) ** 3


def norm2_bound(d: int, m: int, nu: float, L: float, sigma: float) -> float:
    """(nu^2 L^2 / 2m)(d+6)^3 + (2/m)(L^2+sigma^2)(d+4)."""
    return nu * nu * L * L / (2.0 * m) * (d + 6) ** 3 + 2.0 / m * (L * L + sigma * sigma) * (d + 4)


def _trials(instance, z, cfg, n_trials, rng):
    gx = np.empty((n_trials, instance.d_x))
    gy = np.empty((n_trials, instance.d_y))
    for k in range(n_trials):
        est = estimate_instance(instance, z, cfg, rng)
        gx[k], gy[k] = est.g_x, est.g_y
    return gx, gy


def estimator_mse(instance: QuadraticSaddleInstance, z: PointPair, cfg: EstimatorConfig, n_trials: int,
                  rng: np.random.Generator) -> tuple[float, float, float, float]:
    """Empirical E|estimate - grad f|^2 per block, with the matching bounds."""
    gx, gy = _trials(instance, z, cfg, n_trials, rng)
    tx, ty = instance.grad(z)
    k = instance.constants
    nu_x = cfg.nu_x if cfg.order == "zeroth" else 0.0
    nu_y = cfg.nu_y if cfg.order == "zeroth" else 0.0
    return (float(np.mean(np.sum((gx - tx) ** 2, axis=1))),
            float(np.mean(np.sum((gy - ty) ** 2, axis=1))),
            mse_bound(instance.d_x, cfg.m_x, nu_x, k.L, k.L_g, instance.sigma),
            mse_bound(instance.d_y, cfg.m_y, nu_y, k.L, k.L_g, instance.sigma))


def estimator_norm2(instance: QuadraticSaddleInstance, z: PointPair, cfg: EstimatorConfig, n_trials: int,
                    rng: np.random.Generator) -> tuple[float, float, float, float]:
    """Empirical E|estimate|^2 per block, with the printed second-moment bounds.

    The bound has no |grad f|^2 term, so it is only meaningful near a saddle.
    """
    gx, gy = _trials(instance, z, cfg, n_trials, rng)
    k = instance.constants
    return (float(np.mean(np.sum(gx ** 2, axis=1))),
            float(np.mean(np.sum(gy ** 2, axis=1))),
            norm2_bound(instance.d_x, cfg.m_x, cfg.nu_x, k.L, instance.sigma),
            norm2_bound(instance.d_y, cfg.m_y, cfg.nu_y, k.L, instance.sigma))
