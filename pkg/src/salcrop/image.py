"""Raster image buffer and the pixel-level operations shared by the pipeline.

All images are 8-bit RGB, stored row-major as an (h, w, 3) uint8 array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

RGB = tuple[int, int, int]

BLACK: RGB = (0, 0, 0)

# ITU-R BT.601 luma weights.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """A decoded RGB raster. `pixels` has shape (height, width, 3), uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValueError("ImageBuffer requires an (h, w, 3) uint8 array")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def solid(cls, width: int, height: int, color: RGB) -> "ImageBuffer":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:, :] = color
        return cls(px)

    def luma(self) -> np.ndarray:
        """BT.601 luma as float64, shape (h, w)."""
        return self.pixels.astype(np.float64) @ _LUMA_WEIGHTS

    def to_pil(self) -> Image.Image:
        return Image.fromarray(self.pixels, mode="RGB")

    @classmethod
    def from_pil(cls, img: Image.Image) -> "ImageBuffer":
        if img.mode != "RGB":
            img = img.convert("RGB")
        return cls(np.asarray(img, dtype=np.uint8).copy())


def scale_to_height(image: ImageBuffer, height: int) -> ImageBuffer:
    """Bilinear rescale to a fixed height, preserving aspect ratio."""
    if height < 1:
        raise ValueError("target height must be >= 1")
    if height == image.height:
        return image
    width = max(1, int(round(image.width * height / image.height)))
    resized = image.to_pil().resize((width, height), Image.BILINEAR)
    return ImageBuffer.from_pil(resized)


def attach_horizontal(
    img_a: ImageBuffer,
    img_b: ImageBuffer,
    pad_color: RGB = BLACK,
    align: str = "top",
) -> tuple[ImageBuffer, int]:
    """Place two images side by side on a shared canvas.

    The canvas is (w_a + w_b) wide and max(h_a, h_b) tall; rows not covered
    by an image are filled with `pad_color`.  Returns the composite and the
    x coordinate of the boundary between the two slots (= w_a).  A pixel
    column at exactly boundary_x belongs to the right-hand image.
    """
    h = max(img_a.height, img_b.height)
    w = img_a.width + img_b.width
    canvas = np.empty((h, w, 3), dtype=np.uint8)
    canvas[:, :] = pad_color
    for img, x0 in ((img_a, 0), (img_b, img_a.width)):
        y0 = _align_offset(h, img.height, align)
        canvas[y0:y0 + img.height, x0:x0 + img.width] = img.pixels
    return ImageBuffer(canvas), img_a.width


def attach_vertical(
    img_a: ImageBuffer,
    img_b: ImageBuffer,
    pad_color: RGB = BLACK,
    align: str = "left",
) -> tuple[ImageBuffer, int]:
    """Stack two images vertically; returns (composite, boundary_y = h_a)."""
    w = max(img_a.width, img_b.width)
    h = img_a.height + img_b.height
    canvas = np.empty((h, w, 3), dtype=np.uint8)
    canvas[:, :] = pad_color
    for img, y0 in ((img_a, 0), (img_b, img_a.height)):
        x0 = _align_offset(w, img.width, align)
        canvas[y0:y0 + img.height, x0:x0 + img.width] = img.pixels
    return ImageBuffer(canvas), img_a.height


def _align_offset(total: int, size: int, align: str) -> int:
    if align in ("top", "left"):
        return 0
    if align == "center":
        return (total - size) // 2
    if align in ("bottom", "right"):
        return total - size
    raise ValueError(f"unknown alignment {align!r}")


def bilinear_resize(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of a 2-D float grid.

    Uses the half-pixel-center convention: output sample (x, y) reads the
    input at ((x + 0.5) * w_in / w_out - 0.5, ...), clamped at the borders.
    This matches the cell-center mapping used for saliency grids.
    """
    in_h, in_w = grid.shape
    if out_h < 1 or out_w < 1:
        raise ValueError("output dims must be >= 1")
    if (out_h, out_w) == (in_h, in_w):
        return grid.astype(np.float64, copy=True)

    src = grid.astype(np.float64, copy=False)
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    x0 = np.clip(np.floor(xs).astype(int), 0, in_w - 1)
    y0 = np.clip(np.floor(ys).astype(int), 0, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = np.clip(xs - x0, 0.0, 1.0)
    fy = np.clip(ys - y0, 0.0, 1.0)

    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1 - fy)[:, None] + bot * fy[:, None]
