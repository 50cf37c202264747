"""Static log-log regret plots."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .fit import fit_rows  # noqa: E402
from .runner import read_csv  # noqa: E402


def plot_emit(csv_path, out_dir, solver: str | None = None, schedule: str | None = None,
              regret_kinds=None) -> list[Path]:
    """One PNG per (solver, schedule, kind) series with the fitted exponent in the legend."""
    rows = read_csv(csv_path)
    keys = sorted({(r.solver, r.schedule, r.regret_kind) for r in rows
                   if (solver is None or r.solver == solver) and (schedule is None or r.schedule == schedule)
                   and (regret_kinds is None or r.regret_kind in regret_kinds)})
    if not keys:
        raise ValueError("no rows match the plot filter")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for sv, sc, kind in keys:
        fit = fit_rows(rows, sv, sc, kind)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.errorbar(fit.horizons, fit.means, yerr=fit.stds, fmt="o", capsize=3, label="mean ± std")
        line = [fit.means[0] * (T / fit.horizons[0]) ** fit.exponent for T in fit.horizons]
        ax.plot(fit.horizons, line, "--", label=f"slope {fit.exponent:.3f} (r² {fit.r2:.3f})")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("T")
        ax.set_ylabel(kind)
        ax.set_title(f"{sv} / {sc}")
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{sv}_{sc}_{kind}.png"
        # fixed metadata keeps the bytes stable across runs
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
        written.append(path)
    return written
