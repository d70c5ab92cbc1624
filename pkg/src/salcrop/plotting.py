"""Figure rendering for the report paths (file output only, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .audit import AuditReport, SubgroupSaliencyStats, ecdf_points  # noqa: E402
from .image import ImageBuffer, bilinear_resize  # noqa: E402
from .saliency import SaliencyMap  # noqa: E402


def plot_audit_report(report: AuditReport, path: str | Path) -> None:
    """Favored-probability bar with its confidence interval."""
    fig, ax = plt.subplots(figsize=(5, 4))
    label = f"{report.group_a}\nvs\n{report.group_b}"
    err = [[float(report.p_favored_a - report.ci_lo)],
           [float(report.ci_hi - report.p_favored_a)]]
    ax.bar([label], [float(report.p_favored_a)], yerr=err, capsize=6, width=0.4,
           color="#4878d0")
    ax.axhline(0.5, color="gray", linestyle="--", linewidth=1, label="parity")
    ax.set_ylim(0, 1)
    ax.set_ylabel(f"P({report.group_a} favored)")
    ax.set_title(f"{report.variant} audit, n={report.n}  "
                 f"ratio={report.parity_ratio:.3f}"
                 f"{'  FLAGGED' if report.disparate_impact_flag else ''}")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ecdfs(stats: list[SubgroupSaliencyStats], path: str | Path) -> None:
    """Step plots of the max-score and median-score ECDFs per subgroup."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    for ax, which, title in ((axes[0], "max_scores", "maximum score"),
                             (axes[1], "median_scores", "median score")):
        for s in stats:
            pts = ecdf_points(getattr(s, which))
            xs = [v for v, _ in pts]
            ys = [f for _, f in pts]
            ax.step(xs, ys, where="post", label=s.subgroup_id)
        ax.set_xlabel(title)
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("ECDF")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_heatmap_overlay(
    image: ImageBuffer,
    saliency: SaliencyMap,
    path: str | Path,
    alpha: float = 0.6,
    colormap: str = "viridis",
) -> None:
    """Blend a false-color saliency map over the image and save a PNG."""
    up = bilinear_resize(saliency.scores, image.height, image.width)
    peak = up.max()
    norm = up / peak if peak > 0 else np.zeros_like(up)
    cmap = plt.get_cmap(colormap)
    overlay = cmap(norm)[..., :3]
    base = image.pixels.astype(np.float64) / 255.0
    blended = (1 - alpha) * base + alpha * overlay
    out = (np.clip(blended, 0, 1) * 255).astype(np.uint8)
    ImageBuffer(out).to_pil().save(path, format="PNG")
