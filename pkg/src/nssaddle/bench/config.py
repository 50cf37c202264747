"""Experiment configuration: one JSON document, overridable from the CLI.

Grammar (every key optional except ``problem``, ``solver`` and ``schedule``)::

    {
      "problem": {...} | "path/to/problem.json",
      "solver": "eg" | "gda" | "fw",
      "schedule": "static-th2b-light" | {"id": "...", "order": "first", "alpha": 0.25, ...},
      "horizons": [256, 512, 1024, 2048, 4096],
      "seeds": [0, 1, 2, 3, 4, 5, 6, 7],
      "runs_per_point": 8,          # seeds 0..n-1 when "seeds" is absent
      "out": "results.csv",
      "jobs": 1,
      "timing": false               # wall_ms is written as 0 unless true
    }

Problem documents::

    {
      "mu_x": 1.0, "mu_y": 1.0,
      "coupling": [[0.0, 0.5], [-0.5, 0.0]],
      "a0": [0.5, 0.5], "b0": [-0.3, -0.3],
      "drift": {"kind": "sinusoidal", "amplitude": 1.0, "period": 256, "blocks": "x"},
      "sets": {"x": {"kind": "box", "lower": [...], "upper": [...]}, "y": {...}},
      "sigma": 0.5,
      "v_budget": 4.0 | {"coef": 1.0, "power": 0.5},   # coef * T^power
      "w_budget": ...,
      "z0": {"x": [...], "y": [...]}
    }

The run seed doubles as the problem seed, so a random drift is redrawn per seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..problems import DriftSpec, FeasibleSet, PointPair, ProblemSequence
from ..solvers_eg import EG_REGIMES, GDA_REGIMES, EGSchedule, GDASchedule
from ..solvers_fw import ONLINE_REGIMES, OnlineFWSchedule

DEFAULT_HORIZONS = (256, 512, 1024, 2048, 4096)
SOLVER_REGIMES = {"eg": EG_REGIMES, "gda": GDA_REGIMES, "fw": ONLINE_REGIMES}
SCHEDULE_KEYS = {
    "eg": ("order", "alpha", "beta", "step_scale", "eta", "m", "nu", "mode"),
    "gda": ("order", "eta", "m", "nu"),
    "fw": ("order", "gamma", "m", "nu", "mode"),
}


class ConfigError(ValueError):
    pass


def _budget(spec, T: int) -> float | None:
    if spec is None:
        return None
    if isinstance(spec, (int, float)):
        return float(spec)
    return float(spec.get("coef", 1.0)) * T ** float(spec["power"])


@dataclass(frozen=True)
class ProblemSpec:
    """Recipe for a drifting quadratic sequence at any horizon."""

    mu_x: float
    mu_y: float
    coupling: tuple
    a0: tuple
    b0: tuple
    drift: DriftSpec = field(default_factory=lambda: DriftSpec("static"))
    set_x: FeasibleSet | None = None
    set_y: FeasibleSet | None = None
    sigma: float = 0.0
    v_budget: object = None
    w_budget: object = None
    z0: tuple | None = None  # (x, y)

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        try:
            a0 = tuple(float(v) for v in d["a0"])
            b0 = tuple(float(v) for v in d["b0"])
            C = np.array(d["coupling"], dtype=float).reshape(len(a0), len(b0))
            sets = d.get("sets", {})
            z0 = d.get("z0")
            return cls(
                float(d["mu_x"]), float(d["mu_y"]), tuple(map(tuple, C.tolist())), a0, b0,
                DriftSpec.from_dict(d["drift"]) if "drift" in d else DriftSpec("static"),
                FeasibleSet.from_dict(sets["x"]) if "x" in sets else None,
                FeasibleSet.from_dict(sets["y"]) if "y" in sets else None,
                float(d.get("sigma", 0.0)), d.get("v_budget"), d.get("w_budget"),
                (tuple(map(float, z0["x"])), tuple(map(float, z0["y"]))) if z0 else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad problem document: {exc}") from exc

    def to_dict(self) -> dict:
        d = {"mu_x": self.mu_x, "mu_y": self.mu_y, "coupling": [list(r) for r in self.coupling],
             "a0": list(self.a0), "b0": list(self.b0), "drift": self.drift.to_dict(), "sigma": self.sigma}
        sets = {}
        if self.set_x is not None:
            sets["x"] = self.set_x.to_dict()
        if self.set_y is not None:
            sets["y"] = self.set_y.to_dict()
        if sets:
            d["sets"] = sets
        for k in ("v_budget", "w_budget"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        if self.z0 is not None:
            d["z0"] = {"x": list(self.z0[0]), "y": list(self.z0[1])}
        return d

    def build(self, T: int, seed: int) -> ProblemSequence:
        return ProblemSequence.generate(T, self.mu_x, self.mu_y, np.array(self.coupling), self.a0, self.b0,
                                        self.drift, self.set_x, self.set_y, self.sigma, seed,
                                        _budget(self.v_budget, T), _budget(self.w_budget, T))

    def start(self, solver: str) -> PointPair:
        """Explicit z0, else the origin projected onto the sets (FW starts at a vertex)."""
        if self.z0 is not None:
            return PointPair(np.array(self.z0[0]), np.array(self.z0[1]))
        d_x, d_y = len(self.a0), len(self.b0)
        sx = self.set_x or FeasibleSet.unconstrained(d_x)
        sy = self.set_y or FeasibleSet.unconstrained(d_y)
        if solver == "fw":
            from ..solvers_fw import lmo_solve

            return PointPair(lmo_solve(sx, np.ones(d_x)), lmo_solve(sy, np.ones(d_y)))
        x = sx.project(np.zeros(d_x)) if sx.bounded else np.zeros(d_x)
        y = sy.project(np.zeros(d_y)) if sy.bounded else np.zeros(d_y)
        return PointPair(x, y)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    solver: str
    schedule: str
    schedule_options: tuple = ()  # sorted (key, value) pairs
    horizons: tuple = DEFAULT_HORIZONS
    seeds: tuple = tuple(range(8))
    out: str = "results.csv"
    jobs: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.solver not in SOLVER_REGIMES:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.schedule not in SOLVER_REGIMES[self.solver]:
            raise ConfigError(f"schedule {self.schedule!r} is not compatible with solver {self.solver!r}")
        allowed = SCHEDULE_KEYS[self.solver]
        for k, _ in self.schedule_options:
            if k not in allowed:
                raise ConfigError(f"option {k!r} does not apply to solver {self.solver!r}")
        h = list(self.horizons)
        if not h or any(int(t) != t or t < 1 for t in h):
            raise ConfigError("horizons must be positive integers")
        if any(b <= a for a, b in zip(h, h[1:])):
            raise ConfigError("horizons must be strictly increasing")
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ConfigError("seeds must be distinct and non-empty")
        if int(self.jobs) < 1:
            raise ConfigError("jobs must be at least 1")

    def make_schedule(self):
        opts = dict(self.schedule_options)
        if self.solver == "eg":
            return EGSchedule(self.schedule, **opts)
        if self.solver == "gda":
            return GDASchedule(self.schedule, **opts)
        return OnlineFWSchedule(self.schedule, **opts)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if "problem" not in d or "solver" not in d or "schedule" not in d:
            raise ConfigError("config needs problem, solver and schedule")
        prob = d["problem"]
        if isinstance(prob, str):
            path = Path(prob) if base_dir is None else base_dir / prob
            prob = json.loads(path.read_text())
        sched = d["schedule"]
        if isinstance(sched, str):
            sched = {"id": sched}
        options = tuple(sorted((k, v) for k, v in sched.items() if k != "id"))
        seeds = d.get("seeds")
        if seeds is None:
            seeds = list(range(int(d.get("runs_per_point", 8))))
        return cls(ProblemSpec.from_dict(prob), d["solver"], sched["id"], options,
                   tuple(int(t) for t in d.get("horizons", DEFAULT_HORIZONS)),
                   tuple(int(s) for s in seeds), str(d.get("out", "results.csv")), int(d.get("jobs", 1)),
                   bool(d.get("timing", False)))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)

    def to_dict(self) -> dict:
        sched = {"id": self.schedule, **dict(self.schedule_options)}
        return {"problem": self.problem.to_dict(), "solver": self.solver, "schedule": sched,
                "horizons": list(self.horizons), "seeds": list(self.seeds), "out": self.out,
                "jobs": self.jobs, "timing": self.timing}

    def override(self, **kw) -> "ExperimentConfig":
        """Replace fields whose override is not None (CLI flags)."""
        return replace(self, **{k: v for k, v in kw.items() if v is not None})
