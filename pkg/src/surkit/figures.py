"""Figure rendering for the evaluation report path.

Writes PNG files next to the delimited report output: metric histograms, a
ground-truth versus predicted PSNR scatter, and a grid of SUR curves with
their predicted samples.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import EvalReport


def render_report_figures(report: EvalReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist([m.bhattacharyya for m in report.rows], bins=20, color="#3b6ea5")
    ax.set_xlabel("Bhattacharyya distance")
    ax.set_ylabel("images")
    ax.set_title(f"{report.dataset}: predicted vs ground-truth divergence")
    written.append(_save(fig, out / "bhattacharyya_hist.png"))

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist([m.delta_jnd for m in report.rows], bins=20, color="#a53b3b")
    ax.set_xlabel(f"|predicted - true| {report.p:.0f}% JND level")
    ax.set_ylabel("images")
    ax.set_title(f"{report.dataset}: level error")
    written.append(_save(fig, out / "delta_jnd_hist.png"))

    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    gt = [m.gt_psnr for m in report.rows]
    pred = [m.pred_psnr for m in report.rows]
    ax.scatter(gt, pred, s=18, alpha=0.8)
    lo, hi = min(gt + pred), max(gt + pred)
    ax.plot([lo, hi], [lo, hi], "k--", linewidth=0.8)
    ax.set_xlabel(f"PSNR at true {report.p:.0f}% JND (dB)")
    ax.set_ylabel(f"PSNR at predicted {report.p:.0f}% JND (dB)")
    ax.set_title(f"PLCC = {report.plcc:.4f}")
    written.append(_save(fig, out / "psnr_scatter.png"))

    imgs = [m.image_id for m in report.rows][:12]
    if imgs:
        cols = min(4, len(imgs))
        rows_n = math.ceil(len(imgs) / cols)
        fig, axes = plt.subplots(rows_n, cols, figsize=(3.2 * cols, 2.4 * rows_n),
                                 squeeze=False)
        for ax in axes.ravel()[len(imgs):]:
            ax.axis("off")
        for ax, img in zip(axes.ravel(), imgs):
            levels = range(1, len(report.gt_curves[img]) + 1)
            ax.step(levels, report.gt_curves[img], where="post", label="truth")
            ax.step(levels, report.pred_curves[img], where="post", label="predicted")
            ax.set_ylim(-0.05, 1.05)
            ax.set_title(f"image {img}", fontsize=9)
        axes[0][0].legend(fontsize=7)
        fig.supxlabel("distortion level")
        fig.supylabel("SUR")
        written.append(_save(fig, out / "sur_curves.png"))
    return written


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
