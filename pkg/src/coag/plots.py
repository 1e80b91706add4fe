"""SVG figures for experiment reports (matplotlib, Agg backend)."""

from __future__ import annotations

import logging
import warnings
from pathlib import Path
from typing import Dict

import numpy as np

log = logging.getLogger(__name__)


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "coag"  # stable element ids between runs
    return plt


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    _plt().close(fig)
    return path


def emit_plots(report, out_dir) -> Dict[str, Path]:
    """Write every figure the report has data for; returns ``{name: path}``.

    A report without series produces no files and a warning.
    """
    series = getattr(report, "series", None) or {}
    if not series:
        warnings.warn("report has no plottable series; no figures written", RuntimeWarning, stacklevel=2)
        return {}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plt = _plt()
    files: Dict[str, Path] = {}

    if "distance" in series:
        t, d = series["distance"]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(t, np.maximum(d, 1e-300))
        ax.set_xlabel("t")
        ax.set_ylabel("weighted L1 distance to shifted profile")
        files["distance_svg"] = _save(fig, out / "distance.svg")

    if "lyapunov" in series:
        seqs = [np.asarray(v) for v in series["lyapunov"].values() if len(v)]
        if seqs:
            n = min(len(s) for s in seqs)
            M = np.array([s[:n] for s in seqs])
            fig, ax = plt.subplots(figsize=(6, 4))
            qs = np.quantile(M, [0.1, 0.5, 0.9], axis=0)
            idx = np.arange(1, n + 1)
            for q, lab in zip(qs, ("10%", "median", "90%")):
                ax.semilogy(idx, np.maximum(q, 1e-300), label=lab)
            ax.set_xlabel("n")
            ax.set_ylabel("L(n + theta)")
            ax.legend()
            files["lyapunov_svg"] = _save(fig, out / "lyapunov.svg")

    if "profile" in series:
        prof = series["profile"]
        x = prof.x[prof.i_start:]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(x, prof.values[prof.i_start:])
        ax.axhline(prof.plateau, ls=":", c="gray")
        ax.set_xlabel("x")
        ax.set_ylabel("hbar(x)")
        files["profile_svg"] = _save(fig, out / "profile.svg")

    if series.get("snapshots"):
        fig, ax = plt.subplots(figsize=(6, 4))
        for t, (x, h) in sorted(series["snapshots"].items()):
            sel = (x > -6) & (x < 6)
            ax.plot(x[sel], h[sel], lw=1, label=f"t={t:g}")
        ax.set_xlabel("x")
        ax.set_ylabel("h(t, x)")
        ax.legend()
        files["snapshots_svg"] = _save(fig, out / "snapshots.svg")

    if "shifts" in series:
        th, fitted, predicted = series["shifts"]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(th, predicted, label="predicted")
        ax.plot(th, fitted, "o", ms=3, label="fitted")
        ax.set_xlabel("theta")
        ax.set_ylabel("shift")
        ax.legend()
        files["shifts_svg"] = _save(fig, out / "shifts.svg")

    if "refinement" in series:
        dx, sups = series["refinement"]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(dx, sups, "o-", label="sup discrepancy")
        ax.loglog(dx, sups[0] * dx / dx[0], ":", c="gray", label="slope 1")
        ax.set_xlabel("dx")
        ax.legend()
        files["refinement_svg"] = _save(fig, out / "refinement.svg")

    if "collapse" in series:
        z, f0, f1 = series["collapse"]
        sel = (z > 2.0**-6) & (f0 > 0)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.loglog(z[sel], f0[sel], label="t = 0")
        ax.loglog(z[sel], np.maximum(f1[sel], 1e-300), "--", label="t = T")
        ax.set_xlabel("z")
        ax.set_ylabel("phi(z)")
        ax.legend()
        files["collapse_svg"] = _save(fig, out / "collapse.svg")

    return files
