"""Log-log slope fits of mean regret against the horizon."""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .runner import Row, read_csv


class SlopeUndefined(ValueError):
    pass


@dataclass(frozen=True)
class SlopeFit:
    exponent: float
    intercept: float
    r2: float
    horizons: tuple
    means: tuple
    stds: tuple

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "intercept": self.intercept, "r2": self.r2,
                "horizons": list(self.horizons), "means": list(self.means), "stds": list(self.stds)}


def fit_power_law(horizons, means) -> tuple[float, float, float]:
    """OLS of log(mean) on log(T): (slope, intercept, r^2)."""
    x = np.log(np.asarray(horizons, dtype=float))
    y = np.log(np.asarray(means, dtype=float))
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - intercept - slope * x) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def fit_rows(rows: list[Row], solver: str, schedule: str, regret_kind: str) -> SlopeFit:
    by_T = defaultdict(list)
    for r in rows:
        if r.solver == solver and r.schedule == schedule and r.regret_kind == regret_kind:
            by_T[r.T].append(r.value)
    if len(by_T) < 3:
        raise SlopeUndefined("slope-undefined: fewer than 3 horizons")
    Ts, means, stds = [], [], []
    for T in sorted(by_T):
        v = np.array(by_T[T])
        if not np.all(np.isfinite(v)):
            raise SlopeUndefined(f"slope-undefined: non-finite regret at T={T}")
        m = float(np.mean(v))
        if m == 0.0:
            warnings.warn(f"zero mean regret at T={T} dropped from the fit", stacklevel=2)
            continue
        Ts.append(T)
        means.append(m)
        stds.append(float(np.std(v, ddof=1)) if v.size > 1 else 0.0)
    if not Ts:
        raise SlopeUndefined("slope-undefined: all regrets are zero")
    if len(Ts) < 3:
        raise SlopeUndefined("slope-undefined: fewer than 3 nonzero horizons")
    slope, intercept, r2 = fit_power_law(Ts, means)
    return SlopeFit(slope, intercept, r2, tuple(Ts), tuple(means), tuple(stds))


def fit_slope(csv_path, solver: str, schedule: str, regret_kind: str) -> SlopeFit:
    return fit_rows(read_csv(csv_path), solver, schedule, regret_kind)


def fit_exponent_values(xs, ys) -> tuple[float, float]:
    """Slope and r^2 of log(ys) against log(xs); any scale variable works."""
    if any(not (v > 0 and math.isfinite(v)) for v in list(xs) + list(ys)):
        raise SlopeUndefined("slope-undefined: non-positive or non-finite values")
    s, _, r2 = fit_power_law(xs, ys)
    return s, r2
