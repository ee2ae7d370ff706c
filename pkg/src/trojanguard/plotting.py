"""Report figures: ECO round series, resource deltas and the occupancy map."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.2),
    "figure.dpi": 150,
    "savefig.bbox": "tight",
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "svg.hashsalt": "trojanguard",
}
# fixed metadata keeps repeated renders byte-identical
_META = {"png": {"Software": None}, "svg": {"Date": None}, "pdf": {"CreationDate": None, "ModDate": None}}

VERDICT_MARKERS = {"accepted": ("o", "tab:green"), "discarded-timing": ("x", "tab:red"),
                   "discarded-density": ("s", "tab:gray")}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    ext = path.suffix.lstrip(".").lower() or "png"
    fig.savefig(path, metadata=_META.get(ext))
    plt.close(fig)
    return path


def plot_eco_rounds(rounds: list[dict], baseline_tps: float, baseline_wns: float, sc_before: float,
                    df_absolute: float, path: str | Path) -> Path:
    """TPS, WNS and SC after every attempted round; round 0 is the baseline."""
    with plt.rc_context(STYLE):
        fig, (ax_t, ax_s) = plt.subplots(1, 2, figsize=(8.0, 3.0))
        idx = [0] + [r["index"] for r in rounds]
        kept_tps, kept_wns, kept_sc = [baseline_tps], [baseline_wns], [sc_before]
        for r in rounds:
            ok = r["verdict"] == "accepted"
            kept_tps.append(r["tps_after"] if ok else kept_tps[-1])
            kept_wns.append(r["wns_after"] if ok else kept_wns[-1])
            kept_sc.append(r["sc_after"])
        ax_t.step(idx, kept_tps, where="post", color="k", label="TPS (kept)")
        ax_t.step(idx, kept_wns, where="post", color="tab:blue", ls="--", label="WNS (kept)")
        for verdict, (m, c) in VERDICT_MARKERS.items():
            pts = [(r["index"], r["tps_after"]) for r in rounds if r["verdict"] == verdict]
            if pts:
                ax_t.plot(*zip(*pts), marker=m, color=c, ls="none", label=f"tried: {verdict}")
        ax_t.axhline(baseline_tps - df_absolute, color="tab:red", lw=0.8, ls=":", label="baseline TPS - DF")
        ax_t.axhline(0.0, color="0.6", lw=0.6)
        ax_t.set_xlabel("round")
        ax_t.set_ylabel("slack (ns)")
        ax_t.legend(loc="best", frameon=False)
        ax_s.step(idx, kept_sc, where="post", color="tab:green", marker="o")
        ax_s.set_xlabel("round")
        ax_s.set_ylabel("security coverage")
        ax_s.set_ylim(0, 1.02)
        for ax in (ax_t, ax_s):
            ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        fig.tight_layout()
        return _save(fig, Path(path))


def plot_table2(deltas: dict[str, float], path: str | Path) -> Path:
    """Percent change per metric after hardening."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        names = list(deltas)
        vals = [deltas[n] for n in names]
        colors = ["tab:red" if v < 0 else "tab:blue" for v in vals]
        ax.bar(range(len(names)), vals, color=colors)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=30, ha="right")
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_ylabel("change (%)")
        fig.tight_layout()
        return _save(fig, Path(path))


def plot_occupancy(layout, added: set[str], path: str | Path) -> Path:
    """Site map: free, baseline cell, monitor cell."""
    grid = np.zeros((layout.rows, layout.sites), dtype=np.int8)
    for iid, p in layout.placements.items():
        grid[p.row, p.site:p.end] = 2 if iid in added else 1
    with plt.rc_context(STYLE):
        aspect = layout.row_height / layout.site_width
        fig, ax = plt.subplots(figsize=(7.0, max(1.5, min(6.0, 7.0 * layout.rows * aspect / layout.sites))))
        ax.imshow(grid, cmap=ListedColormap(["white", "0.55", "tab:orange"]), vmin=0, vmax=2,
                  aspect=aspect, interpolation="nearest", origin="lower")
        ax.set_xlabel("site")
        ax.set_ylabel("row")
        ax.yaxis.set_major_locator(MaxNLocator(integer=True))
        fig.tight_layout()
        return _save(fig, Path(path))
