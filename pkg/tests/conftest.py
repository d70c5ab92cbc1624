import json

import numpy as np
import pytest

from salcrop import ImageBuffer, encode_image


def noise_image(seed: int, w: int = 32, h: int = 32) -> ImageBuffer:
    rng = np.random.default_rng(seed)
    return ImageBuffer(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


@pytest.fixture
def block_image() -> ImageBuffer:
    """64x64 black image with a white 8x8 block at the top-left corner."""
    px = np.zeros((64, 64, 3), dtype=np.uint8)
    px[:8, :8] = 255
    return ImageBuffer(px)


@pytest.fixture
def centered_block_image() -> ImageBuffer:
    px = np.zeros((64, 64, 3), dtype=np.uint8)
    px[28:36, 28:36] = 255
    return ImageBuffer(px)


def write_corpus(tmp_path, groups: dict[str, list[ImageBuffer]],
                 head_boxes: dict[str, list] | None = None):
    """Write PNGs plus a manifest; returns the manifest path.

    groups maps subgroup id -> list of images; head_boxes (optional) maps
    subgroup id -> per-image head boxes (None entries allowed).
    """
    tmp_path.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps({"subgroups": [
        {"id": gid, "where": {"group": gid}} for gid in groups
    ]})]
    for gid, images in groups.items():
        for k, img in enumerate(images):
            name = f"{gid}_{k:03d}.png"
            encode_image(img, tmp_path / name)
            entry = {
                "image_id": f"{gid}_{k:03d}",
                "path": name,
                "attributes": {"group": gid},
            }
            if head_boxes and head_boxes.get(gid) and head_boxes[gid][k] is not None:
                entry["head_box"] = list(head_boxes[gid][k])
            lines.append(json.dumps(entry))
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest
