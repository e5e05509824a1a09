"""Figure rendering for benchmark output.

Every bench run writes its figures next to the CSV so a run is self-contained:
quality (SSIM/PSNR) and cost (frame time, traversal counters) against the
view deviation angle.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _finite(values):
    return [v for v in values if v is not None and math.isfinite(v)]


def render_bench_figures(rows: list[dict], csv_path: str) -> list[str]:
    """Render quality/cost figures alongside the CSV; returns written paths."""
    base, _ = os.path.splitext(csv_path)
    angles = [r["angle_deg"] for r in rows]
    written = []

    fig, ax1 = plt.subplots(figsize=(6.4, 4.0))
    ax1.plot(angles, [r["ssim"] for r in rows], "o-", color="tab:blue",
             label="SSIM")
    ax1.set_xlabel("view deviation (degrees)")
    ax1.set_ylabel("SSIM", color="tab:blue")
    ax1.set_ylim(0.0, 1.02)
    ax2 = ax1.twinx()
    psnrs = [r["psnr"] for r in rows]
    cap = max(_finite(psnrs) or [100.0]) + 5.0
    ax2.plot(angles, [min(p, cap) if math.isfinite(p) else cap for p in psnrs],
             "s--", color="tab:red", label="PSNR")
    ax2.set_ylabel("PSNR (dB)", color="tab:red")
    ax1.set_title("render quality vs. view deviation")
    fig.tight_layout()
    path = base + "_quality.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax1 = plt.subplots(figsize=(6.4, 4.0))
    ax1.plot(angles, [r["frame_ms"] for r in rows], "o-", color="tab:green",
             label="frame time")
    ax1.set_xlabel("view deviation (degrees)")
    ax1.set_ylabel("frame time (ms)", color="tab:green")
    ax2 = ax1.twinx()
    ax2.plot(angles, [r["lists_visited"] for r in rows], "s--",
             color="tab:purple", label="lists visited")
    ax2.plot(angles, [r["supersegments_intersected"] for r in rows], "^:",
             color="tab:orange", label="supersegments intersected")
    ax2.set_ylabel("traversal counters", color="tab:purple")
    ax2.legend(loc="upper left")
    ax1.set_title("render cost vs. view deviation")
    fig.tight_layout()
    path = base + "_cost.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    return written
