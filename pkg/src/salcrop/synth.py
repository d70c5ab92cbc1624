"""Synthetic figure corpus generator for contrast and gaze experiments.

Each image is a stylized person on a uniform background: an elliptical
head over a torso rectangle, rendered in flat gray so the BT.601 luma of
every pixel equals its configured value.  The torso sits at 60% of the
head-to-background contrast, which keeps it a distinct salient region
without ever outscoring the head.  An optional "jersey patch" adds a
high-frequency checkerboard on the chest (think printed numerals); its
pixel-scale texture outscores the head boundary under a local-contrast
model, which is exactly the off-head failure mode the gaze analysis is
meant to catch.

Generation is deterministic: image k of group g derives its jitter stream
from (seed, g, k), so a corpus regenerates bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CorpusManifest, encode_image, load_manifest
from .image import ImageBuffer
from .rng import Rng, derive_seed, seed_from_text

TORSO_CONTRAST = 0.7  # torso luma sits at this fraction of figure-background contrast

# The head-to-torso gap must leave at least one full grid row of untouched
# background between the two salient rings (window radius 8 on either side
# plus the 8 px cell pitch), or the regions merge under 8-connectivity.
HEAD_TORSO_GAP = 26
# The jersey patch must exceed the 17 px contrast window in both dimensions
# by a full cell pitch, so some window lies entirely inside the texture.
PATCH_HALF = 13


@dataclass(frozen=True)
class FigureLayout:
    head_cx: int
    head_cy: int
    head_rx: int
    head_ry: int
    torso: tuple[int, int, int, int]        # x0, y0, x1, y1 (exclusive)
    patch: tuple[int, int, int, int] | None
    head_box: tuple[int, int, int, int]     # manifest head box (x, y, w, h)


def _layout(w: int, h: int, rng: Rng, with_patch: bool, head_margin: int) -> FigureLayout:
    cx = w // 2 + rng.randint(-3, 3)
    cy = round(h * 0.22) + rng.randint(-3, 3)
    rx = round(w * 0.16) + rng.randint(-1, 1)
    ry = round(h * 0.13) + rng.randint(-1, 1)

    torso_half = round(w * 0.25)
    gap = HEAD_TORSO_GAP + rng.randint(0, 2)
    ty0 = cy + ry + gap
    torso = (cx - torso_half, ty0, cx + torso_half, h - 8)

    patch = None
    if with_patch:
        patch = (cx - PATCH_HALF, ty0 + 2, cx + PATCH_HALF, ty0 + 2 + 2 * PATCH_HALF)

    hb_x = max(0, cx - rx - head_margin)
    hb_y = max(0, cy - ry - head_margin)
    hb_w = min(w, cx + rx + head_margin) - hb_x
    hb_h = min(h, cy + ry + head_margin) - hb_y
    return FigureLayout(cx, cy, rx, ry, torso, patch, (hb_x, hb_y, hb_w, hb_h))


def render_figure(
    width: int,
    height: int,
    figure_luma: int,
    background_luma: int,
    rng: Rng,
    torso_patch_luma: int | None = None,
    head_margin: int = 8,
) -> tuple[ImageBuffer, tuple[int, int, int, int]]:
    """Render one figure image; returns (image, head_box)."""
    lay = _layout(width, height, rng, torso_patch_luma is not None, head_margin)
    gray = np.full((height, width), background_luma, dtype=np.float64)

    torso_luma = background_luma + TORSO_CONTRAST * (figure_luma - background_luma)
    x0, y0, x1, y1 = lay.torso
    gray[max(0, y0):max(0, y1), max(0, x0):max(0, x1)] = torso_luma

    yy, xx = np.ogrid[:height, :width]
    head = (((xx - lay.head_cx) / lay.head_rx) ** 2
            + ((yy - lay.head_cy) / lay.head_ry) ** 2) <= 1.0
    gray[head] = figure_luma

    if lay.patch is not None:
        px0, py0, px1, py1 = lay.patch
        checker = ((xx // 3 + yy // 3) % 2).astype(np.float64)
        patch_vals = torso_patch_luma * (1 - checker) + (255 - torso_patch_luma) * checker
        box = np.zeros_like(head)
        box[py0:py1, px0:px1] = True
        gray[box] = patch_vals[box]

    pixels = np.clip(np.rint(gray), 0, 255).astype(np.uint8)
    return ImageBuffer(np.repeat(pixels[:, :, None], 3, axis=2)), lay.head_box


def generate_corpus(
    out_dir: str | Path,
    figure_lumas: dict[str, int],
    n_per_group: int,
    background_luma: int = 16,
    torso_patch_luma: int | None = None,
    patch_fraction: float = 1.0,
    image_size: tuple[int, int] = (64, 112),
    seed: int = 0,
    head_margin: int = 8,
) -> CorpusManifest:
    """Write a figure corpus (PNGs + manifest.jsonl) and return its manifest.

    One subgroup per key of figure_lumas.  When torso_patch_luma is given,
    the first round(n_per_group * patch_fraction) images of each group get
    a jersey patch; each entry records "patch": "yes"/"no" so tests know
    exactly which images were seeded with the failure mode.
    """
    if not 0 <= background_luma <= 255:
        raise ValueError("background_luma must be in [0, 255]")
    for gid, luma in figure_lumas.items():
        if not 0 <= luma <= 255:
            raise ValueError(f"group {gid!r}: figure luma must be in [0, 255]")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    w, h = image_size

    n_patched = round(n_per_group * patch_fraction) if torso_patch_luma is not None else 0
    lines = [json.dumps({"subgroups": [
        {"id": gid, "where": {"figure": gid}} for gid in figure_lumas
    ]})]

    for gid, luma in figure_lumas.items():
        group_seed = seed_from_text(seed, gid)
        for k in range(n_per_group):
            rng = Rng(derive_seed(group_seed, k))
            patched = k < n_patched
            img, head_box = render_figure(
                w, h, luma, background_luma, rng,
                torso_patch_luma=torso_patch_luma if patched else None,
                head_margin=head_margin,
            )
            name = f"{gid}_{k:04d}.png"
            encode_image(img, out_dir / name)
            lines.append(json.dumps({
                "image_id": f"{gid}_{k:04d}",
                "path": name,
                "attributes": {"figure": gid, "patch": "yes" if patched else "no"},
                "head_box": list(head_box),
            }))

    manifest_path = out_dir / "manifest.jsonl"
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return load_manifest(manifest_path, probe_images=True)
