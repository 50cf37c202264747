"""Quadratic stochastic saddle problems and drifting sequences of them.

A single round is

    f(x, y) = (mu_x/2)|x - a|^2 - (mu_y/2)|y - b|^2 + x^T C y,

observed through noisy value or gradient oracles.  A ``ProblemSequence``
keeps curvature, coupling and feasible sets fixed and lets the centers
``a_t, b_t`` drift, with the drift rescaled to meet a variation budget.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from . import _accel
from .rng import substream

PROBLEM_VERSION = "nssaddle-problem-v1"


class SaddleNotInteriorError(ValueError):
    def __init__(self, detail: str = ""):
        super().__init__("saddle-not-interior" + (f": {detail}" if detail else ""))


def _vec(v, name: str) -> np.ndarray:
    arr = np.array(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.flags.writeable = False
    return arr


# --------------------------------------------------------------------- sets


@dataclass(frozen=True)
class FeasibleSet:
    """Unconstrained space, axis-aligned box or Euclidean ball."""

    kind: str
    dim: int
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None

    @classmethod
    def unconstrained(cls, dim: int) -> "FeasibleSet":
        return cls("unconstrained", int(dim))

    @classmethod
    def box(cls, lower, upper) -> "FeasibleSet":
        lo, hi = _vec(lower, "lower"), _vec(upper, "upper")
        if lo.shape != hi.shape or not np.all(lo < hi):
            raise ValueError("box needs lower < upper coordinatewise")
        return cls("box", lo.size, lower=lo, upper=hi)

    @classmethod
    def ball(cls, center, radius: float) -> "FeasibleSet":
        c = _vec(center, "center")
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        return cls("ball", c.size, center=c, radius=float(radius))

    @property
    def bounded(self) -> bool:
        return self.kind != "unconstrained"

    def diameter(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(self.upper - self.lower))
        if self.kind == "ball":
            return 2.0 * self.radius
        return math.inf

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        if self.kind == "box":
            return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))
        if self.kind == "ball":
            return bool(np.linalg.norm(p - self.center) <= self.radius + tol)
        return True

    def project(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.kind == "box":
            return np.clip(p, self.lower, self.upper)
        if self.kind == "ball":
            off = p - self.center
            n = np.linalg.norm(off)
            return p.copy() if n <= self.radius else self.center + off * (self.radius / n)
        raise ValueError("projection onto an unconstrained set is the identity and is not used")

    def border_distance(self, p) -> float:
        """Distance from ``p`` to the boundary (negative when outside)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "box":
            return float(min(np.min(p - self.lower), np.min(self.upper - p)))
        if self.kind == "ball":
            return float(self.radius - np.linalg.norm(p - self.center))
        return math.inf

    def vertices(self) -> np.ndarray:
        if self.kind != "box":
            raise ValueError("only boxes have a vertex list")
        return np.array(list(itertools.product(*zip(self.lower, self.upper))), dtype=float)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "box":
            return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}
        if self.kind == "ball":
            return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}
        return {"kind": "unconstrained", "dim": self.dim}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FeasibleSet":
        if d["kind"] == "box":
            return cls.box(d["lower"], d["upper"])
        if d["kind"] == "ball":
            return cls.ball(d["center"], d["radius"])
        if d["kind"] == "unconstrained":
            return cls.unconstrained(d["dim"])
        raise ValueError(f"unknown set kind {d['kind']!r}")


# ------------------------------------------------------------------- points


@dataclass(frozen=True)
class PointPair:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _vec(self.x, "x"))
        object.__setattr__(self, "y", _vec(self.y, "y"))

    @classmethod
    def from_vector(cls, z, d_x: int) -> "PointPair":
        z = np.asarray(z, dtype=float)
        return cls(z[:d_x], z[d_x:])

    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    def dist2(self, other: "PointPair") -> float:
        return float(np.sum((self.x - other.x) ** 2) + np.sum((self.y - other.y) ** 2))


# ---------------------------------------------------------------- constants


@dataclass(frozen=True)
class ProblemConstants:
    mu_x: float
    mu_y: float
    L_x: float
    L_y: float
    L_gx: float
    L_gy: float
    L_xy: float
    L_yx: float
    sigma: float
    d_x: int
    d_y: int
    L_h: float = 0.0

    @property
    def mu(self) -> float:
        return min(self.mu_x, self.mu_y)

    @property
    def L(self) -> float:
        return max(self.L_x, self.L_y)

    @property
    def L_g(self) -> float:
        return max(self.L_gx, self.L_gy)


def _reference_radius(a_max: float, b_max: float) -> float:
    return 10.0 * (a_max + b_max + 1.0)


def _value_lipschitz(mu_x, mu_y, C, set_x, set_y, A, B) -> tuple[float, float]:
    """Sup of |grad_x f| and |grad_y f| over the feasible product, all centers A, B."""
    c_norm = float(np.linalg.norm(C, 2)) if C.size else 0.0
    a_max = float(np.max(np.linalg.norm(A, axis=1)))
    b_max = float(np.max(np.linalg.norm(B, axis=1)))
    if set_x.kind == "box" and set_y.kind == "box":
        # |affine| is convex, so its max over a box product sits on a vertex pair
        vx, vy = set_x.vertices(), set_y.vertices()
        px = (mu_x * vx)[:, None, :] + (vy @ C.T)[None, :, :]  # grad_x + mu_x a
        py = (-mu_y * vy)[None, :, :] + (vx @ C)[:, None, :]  # grad_y - mu_y b
        px = px.reshape(-1, px.shape[-1])
        py = py.reshape(-1, py.shape[-1])
        L_x = max(float(np.max(np.linalg.norm(px - mu_x * a, axis=1))) for a in A)
        L_y = max(float(np.max(np.linalg.norm(py + mu_y * b, axis=1))) for b in B)
        return L_x, L_y

    def centre_radius(s, fallback_r):
        if s.kind == "ball":
            return s.center, s.radius
        if s.kind == "box":
            return (s.lower + s.upper) / 2.0, s.diameter() / 2.0
        return np.zeros(s.dim), fallback_r

    R = _reference_radius(a_max, b_max)
    cx, rx = centre_radius(set_x, R)
    cy, ry = centre_radius(set_y, R)
    # triangle-inequality sup over the enclosing balls
    L_x = mu_x * rx + c_norm * ry + float(np.max(np.linalg.norm(mu_x * (cx - A) + C @ cy, axis=1)))
    L_y = mu_y * ry + c_norm * rx + float(np.max(np.linalg.norm(-mu_y * (cy - B) + C.T @ cx, axis=1)))
    return L_x, L_y


# ----------------------------------------------------------------- instance


@dataclass(frozen=True)
class QuadraticSaddleInstance:
    a: np.ndarray
    b: np.ndarray
    mu_x: float
    mu_y: float
    C: np.ndarray
    sigma: float = 0.0
    set_x: FeasibleSet | None = None
    set_y: FeasibleSet | None = None
    offset: float = 0.0  # additive constant; nonzero for averaged instances

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a, "a"))
        object.__setattr__(self, "b", _vec(self.b, "b"))
        C = np.array(self.C, dtype=float).reshape(self.a.size, self.b.size)
        C.flags.writeable = False
        object.__setattr__(self, "C", C)
        if self.mu_x < 0 or self.mu_y < 0 or self.sigma < 0:
            raise ValueError("curvatures and sigma must be nonnegative")
        if self.set_x is None:
            object.__setattr__(self, "set_x", FeasibleSet.unconstrained(self.a.size))
        if self.set_y is None:
            object.__setattr__(self, "set_y", FeasibleSet.unconstrained(self.b.size))
        if self.set_x.dim != self.a.size or self.set_y.dim != self.b.size:
            raise ValueError("feasible set dimension does not match the centers")

    @property
    def d_x(self) -> int:
        return self.a.size

    @property
    def d_y(self) -> int:
        return self.b.size

    def _check(self, z: PointPair) -> None:
        if z.x.size != self.d_x or z.y.size != self.d_y:
            raise ValueError(f"point has dims ({z.x.size}, {z.y.size}), instance has ({self.d_x}, {self.d_y})")

    def value(self, z: PointPair) -> float:
        """Noiseless f(x, y)."""
        self._check(z)
        dx, dy = z.x - self.a, z.y - self.b
        return float(0.5 * self.mu_x * (dx @ dx) - 0.5 * self.mu_y * (dy @ dy) + z.x @ self.C @ z.y + self.offset)

    def grad(self, z: PointPair) -> tuple[np.ndarray, np.ndarray]:
        """Noiseless partial gradients."""
        self._check(z)
        gx = self.mu_x * (z.x - self.a) + self.C @ z.y
        gy = -self.mu_y * (z.y - self.b) + self.C.T @ z.x
        return gx, gy

    @cached_property
    def constants(self) -> ProblemConstants:
        L_x, L_y = _value_lipschitz(self.mu_x, self.mu_y, self.C, self.set_x, self.set_y, self.a[None], self.b[None])
        c_norm = float(np.linalg.norm(self.C, 2)) if self.C.size else 0.0
        return ProblemConstants(self.mu_x, self.mu_y, L_x, L_y, self.mu_x, self.mu_y, c_norm, c_norm,
                                self.sigma, self.d_x, self.d_y)


def kkt_matrix(mu_x: float, mu_y: float, C: np.ndarray) -> np.ndarray:
    d_x, d_y = C.shape
    return np.block([[mu_x * np.eye(d_x), C], [C.T, -mu_y * np.eye(d_y)]])


def _solve_saddles(mu_x, mu_y, C, A, B) -> np.ndarray:
    """Unconstrained saddles for rows of centers A (n x d_x), B (n x d_y)."""
    rhs = np.hstack([mu_x * A, -mu_y * B])
    K = kkt_matrix(mu_x, mu_y, C)
    try:
        return np.linalg.solve(K, rhs.T).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("saddle system is singular (need mu_x, mu_y > 0)") from exc


def _check_interior(set_x: FeasibleSet, set_y: FeasibleSet, Z: np.ndarray) -> None:
    d_x = set_x.dim
    for s, block in ((set_x, Z[:, :d_x]), (set_y, Z[:, d_x:])):
        if not s.bounded:
            continue
        for row, p in enumerate(block):
            if not s.border_distance(p) > 0.0:
                raise SaddleNotInteriorError(f"row {row} at {p.tolist()}")


def eval_value(instance: QuadraticSaddleInstance, z: PointPair, rng: np.random.Generator | None) -> float:
    """Stochastic zeroth-order oracle F(x, y, xi) = f(x, y) + sigma * xi."""
    v = instance.value(z)
    if instance.sigma > 0:
        if rng is None:
            raise ValueError("a generator is required when sigma > 0")
        v += instance.sigma * rng.standard_normal()
    if not math.isfinite(v):
        raise FloatingPointError("oracle value is not finite")
    return v


def eval_grad(instance: QuadraticSaddleInstance, z: PointPair, rng: np.random.Generator | None):
    """Stochastic first-order oracle; per-coordinate noise variance sigma^2/d."""
    gx, gy = instance.grad(z)
    if instance.sigma > 0:
        if rng is None:
            raise ValueError("a generator is required when sigma > 0")
        gx = gx + instance.sigma / math.sqrt(instance.d_x) * rng.standard_normal(instance.d_x)
        gy = gy + instance.sigma / math.sqrt(instance.d_y) * rng.standard_normal(instance.d_y)
    return gx, gy


def saddle_point(instance: QuadraticSaddleInstance) -> PointPair:
    """Exact saddle; raises ``saddle-not-interior`` if it leaves a bounded set."""
    Z = _solve_saddles(instance.mu_x, instance.mu_y, instance.C, instance.a[None], instance.b[None])
    _check_interior(instance.set_x, instance.set_y, Z)
    return PointPair.from_vector(Z[0], instance.d_x)


# -------------------------------------------------------------------- drift


@dataclass(frozen=True)
class DriftSpec:
    """Shape of the center drift; its scale is set by the budgets."""

    kind: str = "static"  # static | sinusoidal | random-walk | jumps | explicit
    amplitude: float = 1.0
    period: float = 64.0
    step_scale: float = 1.0
    count: int = 4
    magnitude: float = 1.0
    seed: int | None = None
    blocks: str = "both"  # which centers move: x, y or both

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "blocks": self.blocks}
        if self.kind == "sinusoidal":
            out.update(amplitude=self.amplitude, period=self.period)
        elif self.kind == "random-walk":
            out.update(step_scale=self.step_scale, seed=self.seed)
        elif self.kind == "jumps":
            out.update(count=self.count, magnitude=self.magnitude, seed=self.seed)
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DriftSpec":
        known = {k: d[k] for k in ("kind", "amplitude", "period", "step_scale", "count", "magnitude", "seed", "blocks") if k in d}
        return cls(**known)


def _unit(d: int) -> np.ndarray:
    return np.ones(d) / math.sqrt(d)


def _raw_drift(spec: DriftSpec, T: int, d_x: int, d_y: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    t = np.arange(1, T + 1, dtype=float)
    if spec.kind == "static":
        da, db = np.zeros((T, d_x)), np.zeros((T, d_y))
    elif spec.kind == "sinusoidal":
        phase = 2.0 * math.pi * t / spec.period
        da = spec.amplitude * np.sin(phase)[:, None] * _unit(d_x)
        db = spec.amplitude * np.cos(phase)[:, None] * _unit(d_y)
    elif spec.kind == "random-walk":
        rng = substream(spec.seed if spec.seed is not None else seed, 101)
        steps = spec.step_scale * rng.standard_normal((T, d_x + d_y))
        steps[0] = 0.0
        walk = np.cumsum(steps, axis=0)
        da, db = walk[:, :d_x], walk[:, d_x:]
    elif spec.kind == "jumps":
        rng = substream(spec.seed if spec.seed is not None else seed, 102)
        jump = np.zeros((T, d_x + d_y))
        for k in range(1, spec.count + 1):
            at = int(round(k * T / (spec.count + 1)))
            if 0 < at < T:
                direction = rng.standard_normal(d_x + d_y)
                jump[at:] += spec.magnitude * direction / np.linalg.norm(direction)
        da, db = jump[:, :d_x], jump[:, d_x:]
    else:
        raise ValueError(f"unknown drift kind {spec.kind!r}")
    if spec.blocks == "x":
        db = np.zeros_like(db)
    elif spec.blocks == "y":
        da = np.zeros_like(da)
    elif spec.blocks != "both":
        raise ValueError("drift blocks must be x, y or both")
    return da, db


# ----------------------------------------------------------------- sequence


@dataclass(frozen=True, eq=False)
class ProblemSequence:
    """Rounds t = 1..T sharing curvature, coupling, sets and noise scale."""

    mu_x: float
    mu_y: float
    C: np.ndarray
    centers_a: np.ndarray  # T x d_x
    centers_b: np.ndarray  # T x d_y
    set_x: FeasibleSet
    set_y: FeasibleSet
    sigma: float = 0.0
    seed: int = 0
    drift: DriftSpec = field(default_factory=DriftSpec)
    v_budget: float | None = None
    w_budget: float | None = None
    a0: np.ndarray | None = None
    b0: np.ndarray | None = None

    def __post_init__(self):
        A = np.array(self.centers_a, dtype=float)
        B = np.array(self.centers_b, dtype=float)
        if A.ndim != 2 or B.ndim != 2 or A.shape[0] != B.shape[0] or A.shape[0] < 1:
            raise ValueError("centers must be T x d arrays with a common T >= 1")
        C = np.array(self.C, dtype=float).reshape(A.shape[1], B.shape[1])
        for arr in (A, B, C):
            arr.flags.writeable = False
        object.__setattr__(self, "centers_a", A)
        object.__setattr__(self, "centers_b", B)
        object.__setattr__(self, "C", C)
        if self.set_x.dim != A.shape[1] or self.set_y.dim != B.shape[1]:
            raise ValueError("feasible set dimension does not match the centers")
        if not (self.mu_x > 0 and self.mu_y > 0):
            raise ValueError("sequences need mu_x, mu_y > 0")

    # -- construction --------------------------------------------------

    @classmethod
    def from_centers(cls, centers_a, centers_b, mu_x, mu_y, C, set_x=None, set_y=None, sigma=0.0, seed=0):
        A = np.atleast_2d(np.asarray(centers_a, dtype=float))
        B = np.atleast_2d(np.asarray(centers_b, dtype=float))
        set_x = set_x or FeasibleSet.unconstrained(A.shape[1])
        set_y = set_y or FeasibleSet.unconstrained(B.shape[1])
        return cls(mu_x, mu_y, C, A, B, set_x, set_y, sigma, seed, DriftSpec(kind="explicit"))

    @classmethod
    def generate(cls, horizon: int, mu_x: float, mu_y: float, C, a0, b0, drift: DriftSpec,
                 set_x: FeasibleSet | None = None, set_y: FeasibleSet | None = None, sigma: float = 0.0,
                 seed: int = 0, v_budget: float | None = None, w_budget: float | None = None) -> "ProblemSequence":
        """Base centers plus a drift of the given shape, scaled to the budgets."""
        a0, b0 = _vec(a0, "a0"), _vec(b0, "b0")
        d_x, d_y = a0.size, b0.size
        set_x = set_x or FeasibleSet.unconstrained(d_x)
        set_y = set_y or FeasibleSet.unconstrained(d_y)
        C = np.array(C, dtype=float).reshape(d_x, d_y)
        da, db = _raw_drift(drift, int(horizon), d_x, d_y, seed)

        def build(scale: float) -> "ProblemSequence":
            return cls(mu_x, mu_y, C, a0 + scale * da, b0 + scale * db, set_x, set_y, sigma, seed, drift,
                       v_budget, w_budget, a0, b0)

        scale = 1.0
        if v_budget is not None:
            Z = _solve_saddles(mu_x, mu_y, C, a0 + da, b0 + db)
            raw = float(math.fsum(np.sum(np.diff(Z, axis=0) ** 2, axis=1)))
            if raw > 0:
                scale = math.sqrt(v_budget / raw)  # V_T is quadratic in the scale
        if w_budget is not None and build(scale).measure_WT() > w_budget:
            lo, hi = 0.0, scale
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if build(mid).measure_WT() <= w_budget:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-15 * hi:
                    break
            scale = lo
        seq = build(scale)
        # guard against the last ulp pushing a budget over
        for _ in range(60):
            over_v = v_budget is not None and seq.exact_VT() > v_budget
            over_w = w_budget is not None and seq.measure_WT() > w_budget
            if not (over_v or over_w):
                break
            scale *= 1.0 - 1e-13
            seq = build(scale)
        return seq

    # -- basic accessors ------------------------------------------------

    @property
    def horizon(self) -> int:
        return self.centers_a.shape[0]

    @property
    def d_x(self) -> int:
        return self.centers_a.shape[1]

    @property
    def d_y(self) -> int:
        return self.centers_b.shape[1]

    @property
    def bounded(self) -> bool:
        return self.set_x.bounded and self.set_y.bounded

    def _round(self, t: int) -> int:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"round {t} outside 1..{self.horizon}")
        return t - 1

    def instance(self, t: int) -> QuadraticSaddleInstance:
        i = self._round(t)
        return QuadraticSaddleInstance(self.centers_a[i], self.centers_b[i], self.mu_x, self.mu_y, self.C,
                                       self.sigma, self.set_x, self.set_y)

    def instances(self):
        return (self.instance(t) for t in range(1, self.horizon + 1))

    def with_sigma(self, sigma: float) -> "ProblemSequence":
        return ProblemSequence(self.mu_x, self.mu_y, self.C, self.centers_a, self.centers_b, self.set_x,
                               self.set_y, sigma, self.seed, self.drift, self.v_budget, self.w_budget, self.a0, self.b0)

    # -- averaged functions J_t -----------------------------------------

    @cached_property
    def _prefix(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        A, B = self.centers_a, self.centers_b
        sq = np.column_stack([np.sum(A * A, axis=1), np.sum(B * B, axis=1)])
        return (_accel.kahan_prefix_mean(np.ascontiguousarray(A)),
                _accel.kahan_prefix_mean(np.ascontiguousarray(B)),
                _accel.kahan_prefix_mean(np.ascontiguousarray(sq)))

    def averaged_centers(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        i = self._round(t)
        return self._prefix[0][i], self._prefix[1][i]

    def averaged_instance(self, t: int) -> QuadraticSaddleInstance:
        """J_t = (1/t) sum_{i<=t} f_i, itself a quadratic with averaged centers."""
        i = self._round(t)
        a_bar, b_bar, sq = self._prefix[0][i], self._prefix[1][i], self._prefix[2][i]
        # mean |a_i|^2 - |a_bar|^2 is the spread the averaged center drops
        offset = 0.5 * self.mu_x * (sq[0] - a_bar @ a_bar) - 0.5 * self.mu_y * (sq[1] - b_bar @ b_bar)
        return QuadraticSaddleInstance(a_bar, b_bar, self.mu_x, self.mu_y, self.C, self.sigma,
                                       self.set_x, self.set_y, offset)

    @cached_property
    def smoothed_saddles(self) -> np.ndarray:
        """Row t-1 holds the saddle of J_t (the comparator written u*_{t+1})."""
        Z = _solve_saddles(self.mu_x, self.mu_y, self.C, self._prefix[0], self._prefix[1])
        _check_interior(self.set_x, self.set_y, Z)
        Z.flags.writeable = False
        return Z

    # -- per-round saddles and budgets ----------------------------------

    @cached_property
    def saddles(self) -> np.ndarray:
        """Row t-1 holds the saddle of f_t, as a joint vector."""
        Z = _solve_saddles(self.mu_x, self.mu_y, self.C, self.centers_a, self.centers_b)
        _check_interior(self.set_x, self.set_y, Z)
        Z.flags.writeable = False
        return Z

    def saddle(self, t: int) -> PointPair:
        return PointPair.from_vector(self.saddles[self._round(t)], self.d_x)

    def exact_VT(self) -> float:
        Z = self.saddles
        return float(math.fsum(np.sum(np.diff(Z, axis=0) ** 2, axis=1)))

    def measure_VT(self) -> float:
        return self.exact_VT()

    def measure_WT(self) -> float:
        """Sum over consecutive rounds of sup |f_t - f_{t+1}| on the feasible set."""
        if not self.bounded:
            raise ValueError("WT-undefined-unbounded")
        A, B = self.centers_a, self.centers_b
        # f_t - f_{t+1} = g_x.x + g_y.y + k
        g_x = self.mu_x * (A[1:] - A[:-1])
        g_y = -self.mu_y * (B[1:] - B[:-1])
        k = 0.5 * self.mu_x * (np.sum(A[:-1] ** 2, 1) - np.sum(A[1:] ** 2, 1)) \
            - 0.5 * self.mu_y * (np.sum(B[:-1] ** 2, 1) - np.sum(B[1:] ** 2, 1))
        hi_x, lo_x = _affine_range(self.set_x, g_x)
        hi_y, lo_y = _affine_range(self.set_y, g_y)
        sup = np.maximum(np.abs(hi_x + hi_y + k), np.abs(lo_x + lo_y + k))
        return float(math.fsum(sup))

    # -- constants ------------------------------------------------------

    @cached_property
    def constants(self) -> ProblemConstants:
        L_x, L_y = _value_lipschitz(self.mu_x, self.mu_y, self.C, self.set_x, self.set_y, self.centers_a, self.centers_b)
        c_norm = float(np.linalg.norm(self.C, 2)) if self.C.size else 0.0
        return ProblemConstants(self.mu_x, self.mu_y, L_x, L_y, self.mu_x, self.mu_y, c_norm, c_norm,
                                self.sigma, self.d_x, self.d_y)

    # -- JSON -----------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "version": PROBLEM_VERSION,
            "horizon": self.horizon,
            "d_x": self.d_x,
            "d_y": self.d_y,
            "mu_x": self.mu_x,
            "mu_y": self.mu_y,
            "coupling": self.C.reshape(-1).tolist(),
        }
        if self.drift.kind == "explicit":
            doc["centers_a"] = self.centers_a.tolist()
            doc["centers_b"] = self.centers_b.tolist()
        else:
            doc["a0"] = self.a0.tolist()
            doc["b0"] = self.b0.tolist()
        doc["drift"] = self.drift.to_dict()
        doc["v_budget"] = self.v_budget
        doc["w_budget"] = self.w_budget
        doc["sets"] = {"x": self.set_x.to_dict(), "y": self.set_y.to_dict()}
        doc["sigma"] = self.sigma
        doc["seed"] = self.seed
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ProblemSequence":
        if doc.get("version") != PROBLEM_VERSION:
            raise ValueError(f"expected version {PROBLEM_VERSION!r}, got {doc.get('version')!r}")
        d_x, d_y = int(doc["d_x"]), int(doc["d_y"])
        C = np.array(doc["coupling"], dtype=float).reshape(d_x, d_y)
        sets = doc.get("sets") or {}
        set_x = FeasibleSet.from_dict(sets["x"]) if "x" in sets else FeasibleSet.unconstrained(d_x)
        set_y = FeasibleSet.from_dict(sets["y"]) if "y" in sets else FeasibleSet.unconstrained(d_y)
        drift = DriftSpec.from_dict(doc.get("drift") or {"kind": "static"})
        sigma, seed = float(doc.get("sigma", 0.0)), int(doc.get("seed", 0))
        if drift.kind == "explicit":
            return cls.from_centers(doc["centers_a"], doc["centers_b"], doc["mu_x"], doc["mu_y"], C,
                                    set_x, set_y, sigma, seed)
        seq = cls.generate(int(doc["horizon"]), float(doc["mu_x"]), float(doc["mu_y"]), C,
                           doc.get("a0", [0.0] * d_x), doc.get("b0", [0.0] * d_y), drift, set_x, set_y,
                           sigma, seed, doc.get("v_budget"), doc.get("w_budget"))
        return seq

    @classmethod
    def from_json(cls, text: str) -> "ProblemSequence":
        return cls.from_dict(json.loads(text))


def _affine_range(s: FeasibleSet, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise max and min of g.p over p in the set."""
    if s.kind == "box":
        hi = np.where(g > 0, g * s.upper, g * s.lower).sum(axis=1)
        lo = np.where(g > 0, g * s.lower, g * s.upper).sum(axis=1)
        return hi, lo
    mid = g @ s.center
    spread = s.radius * np.linalg.norm(g, axis=1)
    return mid + spread, mid - spread


def measure_VT(sequence: ProblemSequence) -> float:
    return sequence.exact_VT()


def measure_WT(sequence: ProblemSequence) -> float:
    return sequence.measure_WT()
