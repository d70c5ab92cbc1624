"""Corpus manifests, image file I/O, and deterministic sampling.

A corpus is a JSON Lines manifest next to its image files.  The first line
is a header object declaring subgroups; each following line is one image
entry:

    {"subgroups": [{"id": "light", "where": {"skin": "light"}}, ...]}
    {"image_id": "img-0001", "path": "img-0001.png",
     "attributes": {"skin": "light", "gender": "female"},
     "head_box": [22, 8, 20, 25],
     "saliency_path": "img-0001.pfm"}

A subgroup's `where` clause is a map of attribute equalities; an entry is
a member when all of them match.  Paths are resolved relative to the
manifest file.  Validation collects every problem in one pass instead of
stopping at the first.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from .image import ImageBuffer
from .rng import Rng

SUPPORTED_FORMATS = ("PNG", "JPEG")


class ImageIOError(ValueError):
    pass


class ManifestError(ValueError):
    """Raised with the full list of manifest problems."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("manifest validation failed:\n" + "\n".join(errors))


def decode_image(path: str | Path) -> ImageBuffer:
    """Decode a PNG or JPEG file into an RGB buffer."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            fmt = img.format
            if fmt not in SUPPORTED_FORMATS:
                raise ImageIOError(f"{path}: unsupported format {fmt!r}")
            img.load()
            return ImageBuffer.from_pil(img)
    except UnidentifiedImageError:
        raise ImageIOError(f"{path}: not a decodable image")
    except OSError as e:
        raise ImageIOError(f"{path}: corrupt or truncated file ({e})")


def encode_image(buffer: ImageBuffer, path: str | Path, format: str = "png") -> None:
    """Write a buffer as PNG (lossless) or JPEG."""
    fmt = format.upper()
    if fmt == "JPG":
        fmt = "JPEG"
    if fmt not in SUPPORTED_FORMATS:
        raise ImageIOError(f"unsupported output format {format!r}")
    buffer.to_pil().save(path, format=fmt)


def probe_image_size(path: Path) -> tuple[int, int]:
    """(width, height) from the file header without a full decode."""
    with Image.open(path) as img:
        return img.size


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: Path
    attributes: dict[str, str] = field(default_factory=dict)
    head_box: tuple[int, int, int, int] | None = None
    saliency_path: Path | None = None
    line_no: int = 0


@dataclass(frozen=True)
class Subgroup:
    id: str
    where: dict[str, str]
    members: tuple[str, ...]  # image ids


@dataclass(frozen=True)
class CorpusManifest:
    path: Path
    entries: tuple[ManifestEntry, ...]
    subgroups: dict[str, Subgroup]

    def entry(self, image_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise KeyError(image_id)

    def subgroup(self, subgroup_id: str) -> Subgroup:
        try:
            return self.subgroups[subgroup_id]
        except KeyError:
            raise KeyError(f"unknown subgroup {subgroup_id!r}; "
                           f"declared: {sorted(self.subgroups)}")


def load_manifest(path: str | Path, probe_images: bool = False) -> CorpusManifest:
    """Parse and validate a JSONL manifest.

    With probe_images=True, image headers are opened to check that any
    head_box fits inside the image.  File existence is always checked.
    Raises ManifestError listing every problem found.
    """
    path = Path(path)
    base = path.parent
    errors: list[str] = []
    entries: list[ManifestEntry] = []
    subgroup_defs: list[tuple[str, dict[str, str]]] = []
    seen_ids: dict[str, int] = {}

    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ManifestError([f"{path}: unreadable ({e})"])

    header_seen = False
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            errors.append(f"line {line_no}: parse error: {e.msg}")
            continue
        if not isinstance(obj, dict):
            errors.append(f"line {line_no}: expected an object")
            continue

        if not header_seen:
            header_seen = True
            if "subgroups" not in obj:
                errors.append(f"line {line_no}: header must declare 'subgroups'")
            else:
                for k, sg in enumerate(obj["subgroups"]):
                    if not isinstance(sg, dict) or "id" not in sg:
                        errors.append(f"line {line_no}: subgroup #{k} needs an 'id'")
                        continue
                    where = sg.get("where", {})
                    if not isinstance(where, dict):
                        errors.append(
                            f"line {line_no}: subgroup {sg['id']!r} 'where' must be an object")
                        continue
                    subgroup_defs.append((str(sg["id"]), {str(a): str(v) for a, v in where.items()}))
            continue

        entry_errors = _validate_entry(obj, line_no, base, seen_ids, probe_images)
        if entry_errors:
            errors.extend(entry_errors)
        else:
            entries.append(_build_entry(obj, line_no, base))
            seen_ids[obj["image_id"]] = line_no

    if not header_seen:
        errors.append("manifest is empty (missing header line)")

    if errors:
        raise ManifestError(errors)

    subgroups = {}
    for sid, where in subgroup_defs:
        members = tuple(
            e.image_id for e in entries
            if all(e.attributes.get(a) == v for a, v in where.items())
        )
        subgroups[sid] = Subgroup(id=sid, where=where, members=members)
    return CorpusManifest(path=path, entries=tuple(entries), subgroups=subgroups)


def _validate_entry(obj, line_no, base, seen_ids, probe_images) -> list[str]:
    errs = []
    image_id = obj.get("image_id")
    if not isinstance(image_id, str) or not image_id:
        errs.append(f"line {line_no}: missing or empty 'image_id'")
        return errs
    if image_id in seen_ids:
        errs.append(f"line {line_no}: duplicate image_id {image_id!r} "
                    f"(first declared on line {seen_ids[image_id]})")
    rel = obj.get("path")
    if not isinstance(rel, str) or not rel:
        errs.append(f"line {line_no}: {image_id}: missing 'path'")
        return errs
    file_path = base / rel
    if not file_path.is_file():
        errs.append(f"line {line_no}: {image_id}: dangling path {rel!r}")
        file_path = None

    sal = obj.get("saliency_path")
    if sal is not None and not (base / sal).is_file():
        errs.append(f"line {line_no}: {image_id}: dangling saliency_path {sal!r}")

    hb = obj.get("head_box")
    if hb is not None:
        if (not isinstance(hb, list) or len(hb) != 4
                or not all(isinstance(v, int) for v in hb)):
            errs.append(f"line {line_no}: {image_id}: head_box must be [x, y, w, h] ints")
        elif hb[0] < 0 or hb[1] < 0 or hb[2] < 1 or hb[3] < 1:
            errs.append(f"line {line_no}: {image_id}: head_box {hb} has bad geometry")
        elif probe_images and file_path is not None:
            try:
                w, h = probe_image_size(file_path)
            except (OSError, UnidentifiedImageError):
                errs.append(f"line {line_no}: {image_id}: cannot probe image {rel!r}")
            else:
                if hb[0] + hb[2] > w or hb[1] + hb[3] > h:
                    errs.append(f"line {line_no}: {image_id}: head_box {hb} "
                                f"exceeds image bounds {w}x{h}")
    return errs


def _build_entry(obj, line_no, base) -> ManifestEntry:
    hb = obj.get("head_box")
    sal = obj.get("saliency_path")
    return ManifestEntry(
        image_id=obj["image_id"],
        path=base / obj["path"],
        attributes={str(a): str(v) for a, v in obj.get("attributes", {}).items()},
        head_box=tuple(hb) if hb is not None else None,
        saliency_path=(base / sal) if sal is not None else None,
        line_no=line_no,
    )


def sample_uniform(
    subgroup: Subgroup, rng_seed: int, n: int, with_replacement: bool = True
) -> list[str]:
    """Draw n image ids uniformly from a subgroup, deterministically."""
    members = subgroup.members
    if not members:
        raise ValueError(f"subgroup {subgroup.id!r} is empty")
    rng = Rng(rng_seed)
    if with_replacement:
        return [members[rng.randrange(len(members))] for _ in range(n)]
    if n > len(members):
        raise ValueError(f"cannot draw {n} without replacement from "
                         f"{len(members)} members")
    pool = list(members)
    rng.shuffle(pool)
    return pool[:n]


class Corpus:
    """A manifest plus a lazy, thread-safe image cache."""

    def __init__(self, manifest: CorpusManifest):
        self.manifest = manifest
        self._cache: dict[str, ImageBuffer] = {}
        self._lock = threading.Lock()
        self._by_id = {e.image_id: e for e in manifest.entries}

    @classmethod
    def load(cls, manifest_path: str | Path, probe_images: bool = False) -> "Corpus":
        return cls(load_manifest(manifest_path, probe_images=probe_images))

    def entry(self, image_id: str) -> ManifestEntry:
        return self._by_id[image_id]

    def image(self, image_id: str) -> ImageBuffer:
        with self._lock:
            cached = self._cache.get(image_id)
        if cached is not None:
            return cached
        buf = decode_image(self._by_id[image_id].path)
        with self._lock:
            self._cache[image_id] = buf
        return buf

    def subgroup(self, subgroup_id: str) -> Subgroup:
        return self.manifest.subgroup(subgroup_id)
