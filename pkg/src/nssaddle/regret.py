"""Regret notions for a played trajectory, all on noiseless function values.

Comparators:
  * per-round saddle z*_t of f_t (dynamic regrets);
  * saddle of the running average J_t = (1/t) sum_{i<=t} f_i, written
    (u*_{t+1}, v*_{t+1}) (static regret uses the one at T+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problems import PointPair, ProblemSequence, QuadraticSaddleInstance

REGRET_KINDS = ("SSP", "SPP", "DSPP", "DSPF", "DSPM", "DSP")


class RegretInvariantError(AssertionError):
    pass


@dataclass(frozen=True)
class SmoothedComparator:
    t: int
    averaged: QuadraticSaddleInstance  # J_{t-1}
    saddle: PointPair  # (u*_t, v*_t)


def smoothed_saddle(sequence: ProblemSequence, t: int) -> SmoothedComparator:
    """Saddle (u*_t, v*_t) of J_{t-1}; defined for 2 <= t <= T+1."""
    if not 2 <= t <= sequence.horizon + 1:
        raise ValueError(f"comparator index {t} outside 2..{sequence.horizon + 1}")
    J = sequence.averaged_instance(t - 1)
    return SmoothedComparator(t, J, PointPair.from_vector(sequence.smoothed_saddles[t - 2], sequence.d_x))


def _values(sequence: ProblemSequence, Z: np.ndarray) -> np.ndarray:
    """f_t(row t-1 of Z) for every round at once."""
    d_x = sequence.d_x
    X, Y = Z[:, :d_x], Z[:, d_x:]
    dx, dy = X - sequence.centers_a, Y - sequence.centers_b
    return (0.5 * sequence.mu_x * np.sum(dx * dx, axis=1) - 0.5 * sequence.mu_y * np.sum(dy * dy, axis=1)
            + np.einsum("ij,jk,ik->i", X, sequence.C, Y))


@dataclass(frozen=True, eq=False)
class RegretLedger:
    """Per-round rows; every aggregate is a plain sum over them."""

    value: np.ndarray  # f_t(z_t)
    value_at_saddle: np.ndarray  # f_t(z*_t)
    value_at_static: np.ndarray  # f_t(u*_{T+1}, v*_{T+1})
    dist2_saddle: np.ndarray  # |z_t - z*_t|^2
    dist2_smoothed: np.ndarray  # |z_t - (u*_{t+1}, v*_{t+1})|^2
    merit: np.ndarray  # f_t(x_t, y*_t) - f_t(x*_t, y_t)
    L: float

    @property
    def horizon(self) -> int:
        return self.value.size

    @property
    def gaps(self) -> np.ndarray:
        return self.value - self.value_at_saddle

    def ssp(self) -> float:
        return abs(math.fsum(self.value) - math.fsum(self.value_at_static))

    def spp(self) -> float:
        return math.fsum(self.dist2_smoothed)

    def dspp(self) -> float:
        return math.fsum(self.dist2_saddle)

    def dspf(self) -> float:
        return math.fsum(np.abs(self.gaps))

    def dspm(self) -> float:
        return math.fsum(self.gaps ** 2)

    def dsp(self) -> float:
        return abs(math.fsum(self.gaps))

    def all(self) -> dict[str, float]:
        return {"SSP": self.ssp(), "SPP": self.spp(), "DSPP": self.dspp(),
                "DSPF": self.dspf(), "DSPM": self.dspm(), "DSP": self.dsp()}

    def check_chains(self) -> None:
        """DSP <= DSPF, DSPF <= 2L sqrt(T DSPP), DSPM <= 2L^2 DSPP."""
        dspp, dspf = self.dspp(), self.dspf()
        slack = 1e-12
        if self.dsp() > dspf * (1 + slack):
            raise RegretInvariantError("DSP exceeds DSPF")
        if dspf > 2 * self.L * math.sqrt(self.horizon * dspp) * (1 + slack) + slack:
            raise RegretInvariantError("DSPF exceeds 2L sqrt(T DSPP)")
        if self.dspm() > 2 * self.L ** 2 * dspp * (1 + slack) + slack:
            raise RegretInvariantError("DSPM exceeds 2L^2 DSPP")


def ledger_from_points(sequence: ProblemSequence, points: np.ndarray) -> RegretLedger:
    """Ledger for the points z_1..z_T (row t-1 played at round t)."""
    Z = np.asarray(points, dtype=float)
    if Z.shape != (sequence.horizon, sequence.d_x + sequence.d_y):
        raise ValueError("points must be a T x (d_x + d_y) array")
    d_x = sequence.d_x
    S = sequence.saddles
    W = sequence.smoothed_saddles
    static = np.broadcast_to(W[-1], Z.shape)
    mixed_x = np.hstack([Z[:, :d_x], S[:, d_x:]])  # (x_t, y*_t)
    mixed_y = np.hstack([S[:, :d_x], Z[:, d_x:]])  # (x*_t, y_t)
    return RegretLedger(
        value=_values(sequence, Z),
        value_at_saddle=_values(sequence, S),
        value_at_static=_values(sequence, np.ascontiguousarray(static)),
        dist2_saddle=np.sum((Z - S) ** 2, axis=1),
        dist2_smoothed=np.sum((Z - W) ** 2, axis=1),
        merit=_values(sequence, mixed_x) - _values(sequence, mixed_y),
        L=sequence.constants.L,
    )


def build_ledger(sequence: ProblemSequence, trajectory) -> RegretLedger:
    return ledger_from_points(sequence, trajectory.points)


def ssp_regret(ledger: RegretLedger, sequence: ProblemSequence | None = None) -> float:
    return ledger.ssp()


def spp_regret(ledger: RegretLedger, sequence: ProblemSequence | None = None) -> float:
    return ledger.spp()


def dspp_regret(ledger: RegretLedger, sequence: ProblemSequence | None = None) -> float:
    return ledger.dspp()


def dspf_regret(ledger: RegretLedger, sequence: ProblemSequence | None = None) -> float:
    value = ledger.dspf()
    if value > 2 * ledger.L * math.sqrt(ledger.horizon * ledger.dspp()) * (1 + 1e-12) + 1e-12:
        raise RegretInvariantError("DSPF exceeds 2L sqrt(T DSPP)")
    return value


def dspm_regret(ledger: RegretLedger, sequence: ProblemSequence | None = None) -> float:
    return ledger.dspm()


def dsp_regret(ledger: RegretLedger, sequence: ProblemSequence | None = None) -> float:
    value = ledger.dsp()
    if value > ledger.dspf() * (1 + 1e-12):
        raise RegretInvariantError("DSP exceeds DSPF")
    return value


def merit(instance: QuadraticSaddleInstance, z: PointPair, saddle: PointPair) -> tuple[float, float, float]:
    """(w_x, w_y, w) with w_x = f(x, y*) - f(x*, y*) and w_y = f(x*, y*) - f(x*, y)."""
    f_star = instance.value(saddle)
    w_x = instance.value(PointPair(z.x, saddle.y)) - f_star
    w_y = f_star - instance.value(PointPair(saddle.x, z.y))
    return w_x, w_y, w_x + w_y
