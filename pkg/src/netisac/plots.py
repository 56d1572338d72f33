"""Static SVG figures: illumination heatmaps, trajectories, rate-vs-threshold curves."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from netisac.geometry import aod_cosine_xy, distance_sq, steering_vector  # noqa: E402
from netisac.scenario import to_db  # noqa: E402

log = logging.getLogger(__name__)

# fixed ids and no timestamp so repeated runs give identical bytes
matplotlib.rcParams["svg.hashsalt"] = "netisac"
_SVG_META = {"Date": None, "Creator": None}


def illumination_map(W: np.ndarray, R: np.ndarray, scenario, xs: np.ndarray, ys: np.ndarray,
                     altitude: float) -> np.ndarray:
    """Illumination at every (y, x) grid point for one slot's covariances ``W[l, i]``, ``R[l]``."""
    sc = scenario
    X = W.sum(axis=1) + R
    out = np.zeros((len(ys), len(xs)))
    for l in range(sc.n_gbs):
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                p = (x, y)
                a = steering_vector(aod_cosine_xy(sc.array.orientation, sc.gbs[l], p, altitude), sc.array)
                out[iy, ix] += (a.conj() @ X[l] @ a).real / distance_sq(sc.gbs[l], p, altitude)
    return out


def heatmap_grid(scenario, cells: int = 40):
    """Cell centres of a square lattice covering every GBS, endpoint and sensing sample."""
    sc = scenario
    pts = np.vstack([sc.gbs, sc.uav_start, sc.uav_end, sc.sensing_xy])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.1 * max(hi - lo) + 1.0
    lo, hi = lo - pad, hi + pad
    xs = lo[0] + (np.arange(cells) + 0.5) * (hi[0] - lo[0]) / cells
    ys = lo[1] + (np.arange(cells) + 0.5) * (hi[1] - lo[1]) / cells
    return xs, ys, (lo[0], hi[0], lo[1], hi[1])


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_heatmap(report, scenario, slot: int, path: Path, cells: int = 40, altitude: float | None = None):
    sc = scenario
    alt = float(sc.sensing_alt[0]) if altitude is None else altitude
    xs, ys, extent = heatmap_grid(sc, cells)
    z = illumination_map(report.beams.W[slot], report.beams.R[slot], sc, xs, ys, alt)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(10 * np.log10(np.maximum(z, 1e-300)), origin="lower", extent=extent, cmap="viridis")
    fig.colorbar(im, ax=ax, label="illumination power (dB)")
    ax.scatter(sc.gbs[:, 0], sc.gbs[:, 1], marker="^", c="red", s=60, label="GBS")
    ax.scatter(sc.sensing_xy[:, 0], sc.sensing_xy[:, 1], marker="x", c="white", s=20, label="sensing")
    q = report.traj.q[:, slot]
    ax.scatter(q[:, 0], q[:, 1], marker="o", c="orange", s=40, label="UAV")
    for k in range(q.shape[0]):
        m = report.assoc.gbs_of[k, slot]
        ax.annotate("", xy=q[k], xytext=sc.gbs[m], arrowprops=dict(arrowstyle="->", color="orange", lw=0.8))
    ax.set_title(f"slot {slot}, altitude {alt:g} m")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(loc="upper right", fontsize=7)
    _save(fig, path)
    return z


def plot_trajectories(report, scenario, path: Path):
    sc = scenario
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.scatter(sc.gbs[:, 0], sc.gbs[:, 1], marker="^", c="red", s=60, label="GBS")
    ax.scatter(sc.sensing_xy[:, 0], sc.sensing_xy[:, 1], marker="x", c="gray", s=20, label="sensing")
    for k in range(report.traj.q.shape[0]):
        q = report.traj.q[k]
        ax.plot(q[:, 0], q[:, 1], "-o", ms=3, label=f"UAV {k}")
        ax.plot([sc.uav_start[k, 0], sc.uav_end[k, 0]], [sc.uav_start[k, 1], sc.uav_end[k, 1]],
                ":", c="gray", lw=0.8)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_sweep(rows: list[dict], path: Path) -> bool:
    """Average sum rate against the threshold, one line per (case, scheme)."""
    ok = [r for r in rows if r["status"] == "ok"]
    if not ok:
        return False
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted({(r["case"], r["scheme"]) for r in ok})
    for case, scheme in keys:
        pts = sorted((r["gamma"], r["average_sum_rate"]) for r in ok if (r["case"], r["scheme"]) == (case, scheme))
        ax.plot([to_db(g) for g, _ in pts], [v for _, v in pts], "-o", label=f"case {case} {scheme}")
    ax.set_xlabel("illumination threshold (dBW)")
    ax.set_ylabel("average sum rate (bps/Hz)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    _save(fig, path)
    return True


def heatmap_slots(n_slots: int) -> list[int]:
    return sorted({0, n_slots // 2, n_slots - 1})


def render_plots(report, scenario, outdir: Path, sweep_rows: list[dict] | None = None) -> list[Path]:
    """Write every figure for ``report``; failures are logged, never raised."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    jobs = []
    if report is not None:
        for n in heatmap_slots(report.traj.q.shape[1]):
            jobs.append((outdir / f"heatmap_slot{n:03d}.svg", plot_heatmap, (report, scenario, n)))
        jobs.append((outdir / "trajectory.svg", plot_trajectories, (report, scenario)))
    if sweep_rows:
        jobs.append((outdir / "rate_vs_gamma.svg", plot_sweep, (sweep_rows,)))
    for path, fn, args in jobs:
        try:
            res = fn(*args, path)
            if res is not False:
                written.append(path)
        except Exception as exc:  # plotting must never sink a run
            log.warning("could not render %s: %s", path.name, exc)
            plt.close("all")
    return written
