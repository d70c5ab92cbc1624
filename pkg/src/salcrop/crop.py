"""Crop geometry and focal-point strategies.

A crop keeps one dimension of the source intact and trims the other to hit
the requested aspect ratio, centering the trimmed dimension on a focal
point and clamping the window back inside the image.  Strategies differ
only in how the focal point is chosen; the pad strategy skips cropping and
letterboxes the image instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import RGB, BLACK, ImageBuffer
from .rng import Rng, derive_seed
from .saliency import (
    Point,
    SaliencyBackend,
    SaliencyMap,
    compute_saliency,
    is_horizontally_symmetric,
    max_salient_point,
    top_k_salient_points,
    DEFAULT_GRID_STEP,
    DEFAULT_SYMMETRY_TOL,
)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class AspectRatio:
    """Width/height as an exact positive rational."""

    num: int
    den: int

    def __post_init__(self):
        if self.num < 1 or self.den < 1:
            raise ValueError("aspect ratio terms must be integers >= 1")

    @property
    def value(self) -> float:
        return self.num / self.den

    @classmethod
    def parse(cls, text: str) -> "AspectRatio":
        """Parse "W:H" with integer terms."""
        try:
            num, den = (int(t) for t in text.split(":"))
        except ValueError:
            raise ValueError(f"bad aspect ratio {text!r}, expected W:H")
        return cls(num, den)

    def __str__(self) -> str:
        return f"{self.num}:{self.den}"


@dataclass(frozen=True)
class CropRect:
    x: int
    y: int
    w: int
    h: int

    def contains(self, p: Point) -> bool:
        return self.x <= p.x < self.x + self.w and self.y <= p.y < self.y + self.h


@dataclass(frozen=True)
class PaddedCanvas:
    """Letterboxed result: the untouched image centered on a larger canvas."""

    canvas_w: int
    canvas_h: int
    image_offset_x: int
    image_offset_y: int
    pad_color: RGB = BLACK


CropSpec = CropRect | PaddedCanvas


@dataclass(frozen=True)
class CropStrategy:
    """Focal-point policy.

    kind: "argmax", "sampling", "average" (saliency-weighted centroid),
    "topk" (unweighted centroid of the k NMS peaks), "focal" (user-given
    point) or "pad" (no crop, background padding).
    """

    kind: str = "argmax"
    k: int = 3
    seed: int = 0
    focal: Point | None = None
    pad_color: RGB = BLACK
    normalization: str = "linear"  # sampling weights: "linear" or "softmax"

    def __post_init__(self):
        if self.kind not in ("argmax", "sampling", "average", "topk", "focal", "pad"):
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.kind == "topk" and self.k < 1:
            raise ValueError("topk strategy needs k >= 1")
        if self.kind == "focal" and self.focal is None:
            raise ValueError("focal strategy needs a point")
        if self.normalization not in ("linear", "softmax"):
            raise ValueError(f"unknown normalization {self.normalization!r}")


def _sample_cell(m: SaliencyMap, rng: Rng, normalization: str) -> tuple[int, int]:
    """Draw a cell index with probability proportional to its score."""
    flat = m.scores.ravel()
    if normalization == "softmax":
        weights = np.exp(flat - flat.max())
    else:
        weights = flat
    total = float(weights.sum())
    if total <= 0:
        raise ValueError("cannot sample from an all-zero saliency map")
    cum = np.cumsum(weights)
    r = rng.random() * total
    idx = int(np.searchsorted(cum, r, side="right"))
    idx = min(idx, flat.size - 1)
    j, i = divmod(idx, m.grid_w)
    return i, j


def _clamp_point(m: SaliencyMap, x: float, y: float) -> Point:
    px = min(max(round_half_up(x), 0), m.source_w - 1)
    py = min(max(round_half_up(y), 0), m.source_h - 1)
    return Point(px, py)


def select_focal(m: SaliencyMap, strategy: CropStrategy, rng_seed: int = 0) -> Point:
    """Pick the focal point for a crop under the given strategy.

    Sampling uses a stream seeded by derive_seed(strategy.seed, rng_seed),
    so repeated calls with the same pair of seeds are bit-reproducible.
    """
    if strategy.kind == "pad":
        raise ValueError("pad strategy has no focal point")

    if strategy.kind == "argmax":
        point, _ = max_salient_point(m)
        return point

    if strategy.kind == "sampling":
        rng = Rng(derive_seed(strategy.seed, rng_seed))
        i, j = _sample_cell(m, rng, strategy.normalization)
        return m.cell_center(i, j)

    if strategy.kind == "average":
        total = float(m.scores.sum())
        gw, gh = m.grid_w, m.grid_h
        cx = ((np.arange(gw) + 0.5) * m.source_w / gw).astype(int)
        cy = ((np.arange(gh) + 0.5) * m.source_h / gh).astype(int)
        if total <= 0:
            # Zero mass: fall back to the unweighted centroid (image center).
            return _clamp_point(m, float(cx.mean()), float(cy.mean()))
        wx = float((m.scores.sum(axis=0) * cx).sum()) / total
        wy = float((m.scores.sum(axis=1) * cy).sum()) / total
        return _clamp_point(m, wx, wy)

    if strategy.kind == "topk":
        points = top_k_salient_points(m, strategy.k)
        if not points:  # all-zero map: no salient points, use the center
            return center_point(m.source_w, m.source_h)
        xs = sum(p.x for p, _ in points) / len(points)
        ys = sum(p.y for p, _ in points) / len(points)
        return _clamp_point(m, xs, ys)

    # focal
    p = strategy.focal
    if not (0 <= p.x < m.source_w and 0 <= p.y < m.source_h):
        raise ValueError(f"focal point {p} outside {m.source_w}x{m.source_h} image")
    return p


def crop_around_focal(
    source_w: int, source_h: int, focal: Point, ar: AspectRatio
) -> CropRect:
    """Single-dimension crop to the target ratio, centered on the focal point.

    If the target is narrower than the source the full height is kept and
    the width trimmed, and vice versa; the trimmed dimension is centered on
    the focal coordinate and the window clamped inside the image, so the
    focal point always ends up inside the returned rect.  The trimmed
    dimension lands within 0.5 px of the exact real-valued target.
    """
    if not (0 <= focal.x < source_w and 0 <= focal.y < source_h):
        raise ValueError("focal point outside source image")

    lhs = ar.num * source_h   # target ar vs source ar, exactly in integers
    rhs = ar.den * source_w
    if lhs == rhs:
        return CropRect(0, 0, source_w, source_h)

    if lhs < rhs:  # target narrower: keep height, trim width
        w = round_half_up(source_h * ar.num / ar.den)
        if w < 1:
            raise ValueError(f"aspect {ar} degenerates to zero width at height {source_h}")
        if w >= source_w:
            return CropRect(0, 0, source_w, source_h)
        x = min(max(focal.x - w // 2, 0), source_w - w)
        return CropRect(x, 0, w, source_h)

    h = round_half_up(source_w * ar.den / ar.num)
    if h < 1:
        raise ValueError(f"aspect {ar} degenerates to zero height at width {source_w}")
    if h >= source_h:
        return CropRect(0, 0, source_w, source_h)
    y = min(max(focal.y - h // 2, 0), source_h - h)
    return CropRect(0, y, source_w, h)


def pad_to_aspect(
    source_w: int, source_h: int, ar: AspectRatio, pad_color: RGB = BLACK
) -> PaddedCanvas:
    """Smallest canvas of the target ratio that contains the image unscaled.

    The image is centered; when the padding is odd the extra pixel goes to
    the right/bottom.
    """
    if source_w * ar.den >= source_h * ar.num:  # source wider than target
        canvas_w = source_w
        canvas_h = round_half_up(source_w * ar.den / ar.num)
    else:
        canvas_h = source_h
        canvas_w = round_half_up(source_h * ar.num / ar.den)
    return PaddedCanvas(
        canvas_w=canvas_w,
        canvas_h=canvas_h,
        image_offset_x=(canvas_w - source_w) // 2,
        image_offset_y=(canvas_h - source_h) // 2,
        pad_color=pad_color,
    )


def center_point(source_w: int, source_h: int) -> Point:
    return Point(source_w // 2, source_h // 2)


def pipeline_focal(
    m: SaliencyMap,
    strategy: CropStrategy,
    rng_seed: int = 0,
    symmetry_tol: float = DEFAULT_SYMMETRY_TOL,
    symmetry_stat: str = "mean",
) -> Point:
    """Focal point as the full pipeline would choose it.

    An almost horizontally symmetric map short-circuits every strategy to
    the image center; otherwise the strategy picks.
    """
    if is_horizontally_symmetric(m, symmetry_tol, symmetry_stat):
        return center_point(m.source_w, m.source_h)
    return select_focal(m, strategy, rng_seed)


def crop_pipeline(
    image: ImageBuffer,
    backend: SaliencyBackend,
    strategy: CropStrategy,
    ars: list[AspectRatio],
    grid_step: int = DEFAULT_GRID_STEP,
    symmetry_tol: float = DEFAULT_SYMMETRY_TOL,
    symmetry_stat: str = "mean",
    rng_seed: int = 0,
) -> list[CropSpec]:
    """One CropSpec per requested aspect ratio.

    Saliency is computed once.  A horizontally symmetric map yields center
    crops for every ratio regardless of strategy; otherwise a single focal
    point chosen by the strategy serves all ratios.  The pad strategy never
    touches saliency.
    """
    if not ars:
        raise ValueError("at least one aspect ratio is required")
    if strategy.kind == "pad":
        return [pad_to_aspect(image.width, image.height, ar, strategy.pad_color)
                for ar in ars]

    m = compute_saliency(image, backend, grid_step)
    focal = pipeline_focal(m, strategy, rng_seed, symmetry_tol, symmetry_stat)
    return [crop_around_focal(image.width, image.height, focal, ar) for ar in ars]


def render_crop(image: ImageBuffer, spec: CropSpec) -> ImageBuffer:
    """Materialize a CropSpec into pixels."""
    if isinstance(spec, CropRect):
        return ImageBuffer(
            image.pixels[spec.y:spec.y + spec.h, spec.x:spec.x + spec.w].copy()
        )
    canvas = np.empty((spec.canvas_h, spec.canvas_w, 3), dtype=np.uint8)
    canvas[:, :] = spec.pad_color
    oy, ox = spec.image_offset_y, spec.image_offset_x
    canvas[oy:oy + image.height, ox:ox + image.width] = image.pixels
    return ImageBuffer(canvas)


def exposure_experiment(
    m: SaliencyMap,
    n_trials: int,
    seed: int = 0,
    strategies: tuple[str, ...] = ("argmax", "sampling"),
) -> dict[str, np.ndarray]:
    """Empirical per-cell selection frequencies for argmax vs sampling.

    Runs n_trials focal selections per strategy (trial t uses the stream
    seeded by derive_seed(seed, t)) and returns, per strategy, a
    (grid_h, grid_w) array of selection frequencies summing to 1.  Argmax
    concentrates all mass on one cell however small its winning margin;
    sampling spreads mass in proportion to the scores.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    freqs: dict[str, np.ndarray] = {}
    for name in strategies:
        counts = np.zeros((m.grid_h, m.grid_w), dtype=np.int64)
        if name == "argmax":
            flat = int(np.argmax(m.scores))
            j, i = divmod(flat, m.grid_w)
            for _ in range(n_trials):
                counts[j, i] += 1
        elif name == "sampling":
            for t in range(n_trials):
                rng = Rng(derive_seed(seed, t))
                i, j = _sample_cell(m, rng, "linear")
                counts[j, i] += 1
        else:
            raise ValueError(f"exposure experiment supports argmax/sampling, not {name!r}")
        freqs[name] = counts / float(n_trials)
    return freqs
