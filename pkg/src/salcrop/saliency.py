"""Saliency maps: computation backends and map-level analysis.

A saliency map is a coarse grid of non-negative scores over an image.
Cell (i, j) of a grid_w x grid_h map over a w x h image is anchored at the
pixel (floor((i + 0.5) * w / grid_w), floor((j + 0.5) * h / grid_h)); every
operation that reports pixel coordinates uses this cell-center mapping.

Two classical backends stand in for a learned saliency model:

* ``spectral``  — spectral residual: the image is reduced to BT.601 luma,
  resized so its longest side matches the backend's internal resolution,
  and transformed with a 2-D FFT.  The residual of the log-amplitude
  spectrum against its 3x3 box-filtered version is inverted with the
  original phase; the squared magnitude, Gaussian-smoothed, is the
  conspicuity map, upsampled to the requested grid.
* ``contrast``  — local luminance contrast: each cell scores the variance
  of luma inside a (2 * grid_step + 1)-pixel square window centered on the
  cell, clipped at the image borders.

A third backend loads an externally produced map from a PFM file and
resamples it to the requested grid bilinearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .image import ImageBuffer, bilinear_resize
from .pfm import read_pfm


@dataclass(frozen=True)
class Point:
    """Pixel coordinates in the source image, 0-based."""

    x: int
    y: int


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    """Grid of non-negative scores with its source-image dimensions.

    `scores` has shape (grid_h, grid_w), row-major like the image.
    """

    scores: np.ndarray
    source_w: int
    source_h: int

    def __post_init__(self):
        s = self.scores
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError("saliency grid must be 2-D and non-empty")
        if self.source_w < 1 or self.source_h < 1:
            raise ValueError("source dimensions must be >= 1")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ValueError("saliency scores must be finite and >= 0")

    @property
    def grid_w(self) -> int:
        return self.scores.shape[1]

    @property
    def grid_h(self) -> int:
        return self.scores.shape[0]

    def cell_center(self, i: int, j: int) -> Point:
        """Pixel anchored to cell (i, j); i is the column, j the row."""
        x = int((i + 0.5) * self.source_w / self.grid_w)
        y = int((j + 0.5) * self.source_h / self.grid_h)
        return Point(x, y)


@dataclass(frozen=True)
class SalientRegion:
    """One connected component of above-threshold cells."""

    bbox: tuple[int, int, int, int]  # (x, y, w, h) in grid cells
    peak: Point                      # pixel coords of the strongest cell
    peak_score: float
    mass: float                      # sum of member-cell scores
    cell_count: int


@dataclass(frozen=True)
class SaliencyBackend:
    """Backend selector plus its tuning parameters.

    kind is one of "spectral", "contrast" or "external".  For "external",
    `path` must point to a PFM map exported for the same image.
    `window_radius` overrides the contrast window half-size (defaults to
    the grid step at compute time).
    """

    kind: str = "spectral"
    path: str | None = None
    internal_max_side: int = 64
    smooth_sigma: float = 2.5
    window_radius: int | None = None

    def __post_init__(self):
        if self.kind not in ("spectral", "contrast", "external"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "external" and not self.path:
            raise ValueError("external backend requires a map path")
        if self.internal_max_side < 1 or self.smooth_sigma <= 0:
            raise ValueError("backend parameters must be positive")
        if self.window_radius is not None and self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")

    @classmethod
    def parse(cls, spec: str) -> "SaliencyBackend":
        """Parse a CLI backend spec: spectral | contrast | external:<path>."""
        if spec in ("spectral", "contrast"):
            return cls(kind=spec)
        if spec.startswith("external:"):
            return cls(kind="external", path=spec.split(":", 1)[1])
        raise ValueError(f"unknown backend {spec!r}")


DEFAULT_GRID_STEP = 8
DEFAULT_SYMMETRY_TOL = 0.05
DEFAULT_REGION_THRESHOLD = 0.3


def default_min_sep(source_w: int, source_h: int) -> int:
    """Top-k spacing heuristic: 10% of the image diagonal, at least 1 px."""
    return max(1, int(round(0.1 * math.hypot(source_w, source_h))))


def compute_saliency(
    image: ImageBuffer,
    backend: SaliencyBackend,
    grid_step: int = DEFAULT_GRID_STEP,
) -> SaliencyMap:
    """Score a grid of ceil(w/step) x ceil(h/step) cells over the image.

    Pure function: identical (image, backend, step) inputs produce a
    bit-identical map.
    """
    if grid_step < 1:
        raise ValueError("grid_step must be >= 1")
    w, h = image.width, image.height
    grid_w = -(-w // grid_step)
    grid_h = -(-h // grid_step)

    if backend.kind == "contrast":
        scores = _contrast_scores(image, grid_w, grid_h, grid_step, backend)
    elif backend.kind == "spectral":
        scores = _spectral_scores(image, grid_w, grid_h, backend)
    else:
        scores = _external_scores(image, grid_w, grid_h, backend)

    return SaliencyMap(scores=scores, source_w=w, source_h=h)


def _contrast_scores(image, grid_w, grid_h, grid_step, backend):
    """Windowed luma variance per cell, via integral images.

    Luma is kept in integer millesimals (299 R + 587 G + 114 B) so the
    variance numerator n*S2 - S1^2 is computed exactly: a constant window
    scores exactly zero instead of leaving cancellation dust.
    """
    radius = backend.window_radius if backend.window_radius is not None else grid_step
    px = image.pixels.astype(np.int64)
    luma = 299 * px[..., 0] + 587 * px[..., 1] + 114 * px[..., 2]
    h, w = luma.shape

    s1 = np.zeros((h + 1, w + 1), dtype=np.int64)
    s2 = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(luma, axis=0), axis=1, out=s1[1:, 1:])
    np.cumsum(np.cumsum(luma * luma, axis=0), axis=1, out=s2[1:, 1:])

    cx = ((np.arange(grid_w) + 0.5) * w / grid_w).astype(int)
    cy = ((np.arange(grid_h) + 0.5) * h / grid_h).astype(int)
    x0 = np.clip(cx - radius, 0, w - 1)
    x1 = np.clip(cx + radius, 0, w - 1)
    y0 = np.clip(cy - radius, 0, h - 1)
    y1 = np.clip(cy + radius, 0, h - 1)

    def window_sum(table):
        return (table[np.ix_(y1 + 1, x1 + 1)] - table[np.ix_(y0, x1 + 1)]
                - table[np.ix_(y1 + 1, x0)] + table[np.ix_(y0, x0)])

    n = (y1 - y0 + 1)[:, None] * (x1 - x0 + 1)[None, :]
    sum1, sum2 = window_sum(s1), window_sum(s2)
    if (2 * radius + 1) ** 2 <= 11_000:  # n*S2 and S1^2 stay within int64
        numerator = (n * sum2 - sum1 * sum1).astype(np.float64)
    else:
        numerator = n * sum2.astype(np.float64) - sum1.astype(np.float64) ** 2
    return np.maximum(numerator, 0.0) / (n * n) / 1e6


def _spectral_scores(image, grid_w, grid_h, backend):
    """Spectral residual conspicuity.

    The luma is mean-centered before the FFT (a featureless image maps to
    all-zero scores), the log uses an epsilon relative to the mean spectrum
    amplitude so exact spectral nulls of synthetic patterns cannot blow up
    the residual, and both filters wrap, matching the periodicity of the
    DFT domains they operate in.
    """
    luma = image.luma()
    h, w = luma.shape

    side = backend.internal_max_side
    if max(h, w) != side:
        f = side / max(h, w)
        luma = bilinear_resize(luma, max(1, round(h * f)), max(1, round(w * f)))

    luma = luma - luma.mean()
    spectrum = np.fft.fft2(luma)
    amplitude = np.abs(spectrum)
    if amplitude.max() == 0:
        return np.zeros((grid_h, grid_w))
    log_amp = np.log(amplitude + 1e-3 * amplitude.mean())
    phase = np.angle(spectrum)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="wrap")
    conspicuity = np.abs(np.fft.ifft2(np.exp(residual + 1j * phase))) ** 2
    smoothed = ndimage.gaussian_filter(conspicuity, sigma=backend.smooth_sigma,
                                       mode="wrap")
    return np.maximum(bilinear_resize(smoothed, grid_h, grid_w), 0.0)


def _external_scores(image, grid_w, grid_h, backend):
    stored = read_pfm(Path(backend.path))
    if not np.all(np.isfinite(stored)) or np.any(stored < 0):
        raise ValueError(f"{backend.path}: external map must be finite and >= 0")
    return bilinear_resize(stored.astype(np.float64), grid_h, grid_w)


def _argmax_cell(m: SaliencyMap) -> tuple[int, int]:
    """(col, row) of the max cell; ties resolve to the row-major first."""
    flat = int(np.argmax(m.scores))  # np.argmax is row-major first-max
    j, i = divmod(flat, m.grid_w)
    return i, j


def max_salient_point(m: SaliencyMap) -> tuple[Point, float]:
    """The strongest cell mapped to pixel coordinates, with its score.

    Tie-break is row-major (smallest y, then smallest x), so the result is
    deterministic even for flat maps; an all-zero map yields cell (0, 0).
    """
    i, j = _argmax_cell(m)
    return m.cell_center(i, j), float(m.scores[j, i])


def top_k_salient_points(
    m: SaliencyMap, k: int, min_sep: float | None = None
) -> list[tuple[Point, float]]:
    """Greedy non-maximum suppression over cells.

    Repeatedly takes the strongest remaining cell (row-major tie-break) and
    suppresses every cell whose anchor pixel lies within Euclidean distance
    min_sep of it.  Returns at most k points in non-increasing score order;
    fewer when suppression exhausts the positive-score cells (a zero cell
    is never a salient point).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if min_sep is None:
        min_sep = default_min_sep(m.source_w, m.source_h)
    if min_sep < 0:
        raise ValueError("min_sep must be >= 0")

    gw, gh = m.grid_w, m.grid_h
    px = ((np.arange(gw) + 0.5) * m.source_w / gw).astype(int)
    py = ((np.arange(gh) + 0.5) * m.source_h / gh).astype(int)
    xs = np.broadcast_to(px[None, :], (gh, gw)).astype(np.float64)
    ys = np.broadcast_to(py[:, None], (gh, gw)).astype(np.float64)

    scores = m.scores.copy()
    alive = scores > 0
    picked: list[tuple[Point, float]] = []
    sep_sq = float(min_sep) ** 2

    while len(picked) < k and alive.any():
        masked = np.where(alive, scores, -np.inf)
        flat = int(np.argmax(masked))
        j, i = divmod(flat, gw)
        picked.append((Point(int(px[i]), int(py[j])), float(scores[j, i])))
        dist_sq = (xs - px[i]) ** 2 + (ys - py[j]) ** 2
        alive &= dist_sq > sep_sq  # suppress everything within min_sep, self included
    return picked


def is_horizontally_symmetric(
    m: SaliencyMap, tol: float = DEFAULT_SYMMETRY_TOL, stat: str = "mean"
) -> bool:
    """Whether the map is (almost) mirror-symmetric about the vertical axis.

    Compares each cell against its horizontal mirror and tests the chosen
    statistic of |difference| against tol * max score.  `stat` is "mean"
    (default) or "max".  An all-zero map counts as symmetric.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    diff = np.abs(m.scores - m.scores[:, ::-1])
    if stat == "mean":
        d = float(diff.mean())
    elif stat == "max":
        d = float(diff.max())
    else:
        raise ValueError(f"unknown symmetry statistic {stat!r}")
    return d <= tol * float(m.scores.max())


def segment_salient_regions(
    m: SaliencyMap, threshold_frac: float = DEFAULT_REGION_THRESHOLD
) -> list[SalientRegion]:
    """Connected components of cells scoring >= threshold_frac * max.

    Components use 8-connectivity (diagonal cells join).  Regions come back
    in descending-mass order, bbox row-major as the tie-break.  An all-zero
    map has no regions.
    """
    if not 0 < threshold_frac <= 1:
        raise ValueError("threshold_frac must be in (0, 1]")
    peak = float(m.scores.max())
    if peak <= 0:
        return []
    mask = m.scores >= threshold_frac * peak
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))

    regions = []
    for lab in range(1, n + 1):
        member = labels == lab
        rows, cols = np.nonzero(member)
        x0, x1 = int(cols.min()), int(cols.max())
        y0, y1 = int(rows.min()), int(rows.max())
        member_scores = np.where(member, m.scores, -np.inf)
        flat = int(np.argmax(member_scores))
        j, i = divmod(flat, m.grid_w)
        regions.append(SalientRegion(
            bbox=(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
            peak=m.cell_center(i, j),
            peak_score=float(m.scores[j, i]),
            mass=float(m.scores[member].sum()),
            cell_count=int(member.sum()),
        ))
    regions.sort(key=lambda r: (-r.mass, r.bbox[1], r.bbox[0]))
    return regions
