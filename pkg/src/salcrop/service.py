"""Human-in-the-loop crop service.

Workflow: POST an image, GET ranked focal-point candidates with preview
crop rects per aspect ratio, POST the point the user picked, then GET the
final crop (geometry as JSON, or the cropped pixels as PNG).  Without a
selection, crops fall back to the pipeline's own focal point (center for
symmetric maps, argmax otherwise), so the API also works headlessly and
agrees with the batch CLI.

Sessions live in memory with TTL eviction; all crop geometry comes from
the crop module, never re-derived here.
"""

from __future__ import annotations

import hashlib
import io
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image, UnidentifiedImageError

from .corpus import ImageIOError
from .crop import AspectRatio, CropStrategy, crop_around_focal, pipeline_focal, render_crop
from .image import ImageBuffer, bilinear_resize
from .saliency import (
    DEFAULT_GRID_STEP,
    Point,
    SaliencyBackend,
    SaliencyMap,
    compute_saliency,
    default_min_sep,
    is_horizontally_symmetric,
    top_k_salient_points,
)

MAX_SALIENCY_GRID = 128  # cap on the JSON grid served to the UI


@dataclass
class ServiceConfig:
    backend: SaliencyBackend = field(default_factory=SaliencyBackend)
    grid_step: int = DEFAULT_GRID_STEP
    max_bytes: int = 8 * 2**20
    ttl_seconds: float = 3600.0
    default_k: int = 3
    max_k: int = 10
    store_dir: Path | None = None


class Session:
    def __init__(self, image_id: str, image: ImageBuffer):
        self.image_id = image_id
        self.image = image
        self.created_at = time.monotonic()
        self.selection: Point | None = None
        self.lock = threading.Lock()
        self._map: SaliencyMap | None = None


class SessionStore:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.saliency_computes = 0  # instrumentation for tests

    def sweep(self) -> None:
        deadline = time.monotonic() - self.config.ttl_seconds
        with self._lock:
            expired = [k for k, s in self._sessions.items() if s.created_at < deadline]
            for k in expired:
                del self._sessions[k]

    def put(self, image: ImageBuffer, raw: bytes) -> str:
        image_id = hashlib.sha256(raw).hexdigest()[:16]
        with self._lock:
            if image_id not in self._sessions:
                self._sessions[image_id] = Session(image_id, image)
        if self.config.store_dir is not None:
            self.config.store_dir.mkdir(parents=True, exist_ok=True)
            (self.config.store_dir / f"{image_id}.png").write_bytes(
                _encode_png(image))
        return image_id

    def get(self, image_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(image_id)

    def saliency(self, session: Session) -> SaliencyMap:
        """Compute the session's map at most once, even under racing requests."""
        with session.lock:
            if session._map is None:
                session._map = compute_saliency(
                    session.image, self.config.backend, self.config.grid_step)
                self.saliency_computes += 1
            return session._map


def _encode_png(image: ImageBuffer) -> bytes:
    buf = io.BytesIO()
    image.to_pil().save(buf, format="PNG")
    return buf.getvalue()


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _parse_ars(text: str) -> list[AspectRatio]:
    return [AspectRatio.parse(part) for part in text.split(",") if part]


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    store = SessionStore(config)
    app = FastAPI(title="salcrop service")
    app.state.store = store
    app.state.config = config

    @app.post("/images")
    async def upload(request: Request):
        store.sweep()
        raw = await request.body()
        if len(raw) > config.max_bytes:
            return _error(413, f"image exceeds {config.max_bytes} bytes")
        try:
            with Image.open(io.BytesIO(raw)) as img:
                if img.format not in ("PNG", "JPEG"):
                    return _error(400, f"unsupported format {img.format!r}")
                img.load()
                image = ImageBuffer.from_pil(img)
        except (UnidentifiedImageError, OSError, ImageIOError):
            return _error(400, "request body is not a decodable PNG/JPEG")
        image_id = store.put(image, raw)
        return JSONResponse({"image_id": image_id}, status_code=201)

    @app.get("/images/{image_id}/candidates")
    def candidates(image_id: str, k: int | None = None, ars: str = "1:1"):
        store.sweep()
        session = store.get(image_id)
        if session is None:
            return _error(404, f"unknown image {image_id!r}")
        k = config.default_k if k is None else k
        if not 1 <= k <= config.max_k:
            return _error(400, f"k must be in [1, {config.max_k}]")
        try:
            ratios = _parse_ars(ars)
        except ValueError as e:
            return _error(400, str(e))

        m = store.saliency(session)
        img = session.image
        symmetric = is_horizontally_symmetric(m)
        if symmetric:
            center = Point(img.width // 2, img.height // 2)
            gi = min(m.grid_w - 1, center.x * m.grid_w // img.width)
            gj = min(m.grid_h - 1, center.y * m.grid_h // img.height)
            points = [(center, float(m.scores[gj, gi]))]
        else:
            points = top_k_salient_points(
                m, k, default_min_sep(img.width, img.height))

        out = []
        for point, score in points:
            previews = []
            for ar in ratios:
                rect = crop_around_focal(img.width, img.height, point, ar)
                previews.append({"ar": str(ar), "rect": {
                    "x": rect.x, "y": rect.y, "w": rect.w, "h": rect.h}})
            out.append({"point": {"x": point.x, "y": point.y},
                        "score": score, "previews": previews})
        return {"candidates": out, "symmetric": symmetric}

    @app.get("/images/{image_id}/saliency")
    def saliency_grid(image_id: str):
        store.sweep()
        session = store.get(image_id)
        if session is None:
            return _error(404, f"unknown image {image_id!r}")
        m = store.saliency(session)
        scores = m.scores
        if m.grid_w > MAX_SALIENCY_GRID or m.grid_h > MAX_SALIENCY_GRID:
            gh = min(m.grid_h, MAX_SALIENCY_GRID)
            gw = min(m.grid_w, MAX_SALIENCY_GRID)
            scores = bilinear_resize(scores, gh, gw)
        return {
            "grid_w": scores.shape[1],
            "grid_h": scores.shape[0],
            "source_w": m.source_w,
            "source_h": m.source_h,
            "scores": [[float(v) for v in row] for row in scores],
        }

    @app.post("/images/{image_id}/selection")
    async def select(image_id: str, request: Request):
        store.sweep()
        session = store.get(image_id)
        if session is None:
            return _error(404, f"unknown image {image_id!r}")
        try:
            body = await request.json()
            x, y = int(body["x"]), int(body["y"])
        except Exception:
            return _error(422, "body must be a JSON object with integer x and y")
        if not (0 <= x < session.image.width and 0 <= y < session.image.height):
            return _error(422, f"point ({x}, {y}) outside "
                               f"{session.image.width}x{session.image.height} image")
        with session.lock:
            session.selection = Point(x, y)  # last write wins
        return Response(status_code=204)

    @app.get("/images/{image_id}/crop")
    def crop(image_id: str, ar: str = "1:1", format: str = "json"):
        store.sweep()
        session = store.get(image_id)
        if session is None:
            return _error(404, f"unknown image {image_id!r}")
        try:
            ratio = AspectRatio.parse(ar)
        except ValueError as e:
            return _error(400, str(e))
        if format not in ("json", "png"):
            return _error(400, f"unknown format {format!r}")

        img = session.image
        with session.lock:
            selection = session.selection
        if selection is not None:
            focal, selected = selection, True
        else:
            m = store.saliency(session)
            focal = pipeline_focal(m, CropStrategy(kind="argmax"))
            selected = False
        rect = crop_around_focal(img.width, img.height, focal, ratio)
        if format == "png":
            png = _encode_png(render_crop(img, rect))
            return Response(content=png, media_type="image/png")
        return {
            "ar": str(ratio),
            "rect": {"x": rect.x, "y": rect.y, "w": rect.w, "h": rect.h},
            "focal": {"x": focal.x, "y": focal.y},
            "selected": selected,
        }

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
