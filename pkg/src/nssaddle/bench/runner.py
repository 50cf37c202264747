"""Grid runner: every (horizon, seed) cell is independent and seeded by its own
substream, so the CSV does not depend on scheduling or the number of workers."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..regret import REGRET_KINDS, build_ledger
from ..solvers_eg import DivergenceError, run_eg, run_gda
from ..solvers_fw import run_fw_online
from .config import ExperimentConfig

log = logging.getLogger(__name__)

COLUMNS = ("solver", "schedule", "T", "seed", "regret_kind", "value", "oracle_calls", "wall_ms")
_KIND_ORDER = {k: i for i, k in enumerate(REGRET_KINDS)}
_RUNNERS = {"eg": run_eg, "gda": run_gda, "fw": run_fw_online}


@dataclass(frozen=True)
class Row:
    solver: str
    schedule: str
    T: int
    seed: int
    regret_kind: str
    value: float
    oracle_calls: int
    wall_ms: float

    def sort_key(self):
        return (self.solver, self.schedule, self.T, self.seed, _KIND_ORDER.get(self.regret_kind, 99))


def fmt(v: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def run_cell(config: ExperimentConfig, T: int, seed: int) -> list[Row]:
    """One run; a diverged run reports infinite regret for every kind."""
    sequence = config.problem.build(T, seed)
    schedule = config.make_schedule()
    z0 = config.problem.start(config.solver)
    try:
        traj = _RUNNERS[config.solver](sequence, schedule, z0, seed)
    except DivergenceError as exc:
        log.info("T=%d seed=%d: %s", T, seed, exc)
        return [Row(config.solver, config.schedule, T, seed, k, math.inf, 0, 0.0) for k in REGRET_KINDS]
    values = build_ledger(sequence, traj).all()
    wall = float(traj.wall_ms.sum()) if config.timing else 0.0
    calls = traj.total_calls
    return [Row(config.solver, config.schedule, T, seed, k, values[k], calls, wall) for k in REGRET_KINDS]


def _cell(args):
    return run_cell(*args)


def collect(config: ExperimentConfig) -> list[Row]:
    cells = [(config, T, s) for T in config.horizons for s in config.seeds]
    if config.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_cell, cells))
    else:
        chunks = [_cell(c) for c in cells]
    rows = [r for chunk in chunks for r in chunk]
    return sorted(rows, key=Row.sort_key)


def rows_to_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in sorted(rows, key=Row.sort_key):
        w.writerow([r.solver, r.schedule, r.T, r.seed, r.regret_kind, fmt(r.value), r.oracle_calls, fmt(r.wall_ms)])
    return buf.getvalue()


def read_csv(path) -> list[Row]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"missing columns: {sorted(missing)}")
        return [Row(d["solver"], d["schedule"], int(d["T"]), int(d["seed"]), d["regret_kind"], float(d["value"]),
                    int(d["oracle_calls"]), float(d["wall_ms"])) for d in reader]


def run_experiment(config: ExperimentConfig, out: str | Path | None = None) -> Path:
    """Run the grid and write the CSV; returns its path."""
    path = Path(out if out is not None else config.out)
    text = rows_to_csv(collect(config))
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    path.write_text(text)
    return path
