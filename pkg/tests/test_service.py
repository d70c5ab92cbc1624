import io
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from fastapi.testclient import TestClient

from salcrop import (
    AspectRatio,
    CropStrategy,
    ImageBuffer,
    SaliencyBackend,
    compute_saliency,
    crop_around_focal,
    crop_pipeline,
)
from salcrop.service import ServiceConfig, create_app

from conftest import noise_image


def png_bytes(img: ImageBuffer) -> bytes:
    buf = io.BytesIO()
    img.to_pil().save(buf, format="PNG")
    return buf.getvalue()


def two_peak_image() -> ImageBuffer:
    px = np.zeros((96, 96, 3), dtype=np.uint8)
    px[8:24, 8:24] = 255
    px[64:80, 64:80] = 180
    return ImageBuffer(px)


@pytest.fixture
def client():
    config = ServiceConfig(backend=SaliencyBackend(kind="contrast"))
    return TestClient(create_app(config))


def upload(client, img: ImageBuffer) -> str:
    resp = client.post("/images", content=png_bytes(img))
    assert resp.status_code == 201
    return resp.json()["image_id"]


def test_upload_valid_png(client):
    image_id = upload(client, noise_image(0))
    assert len(image_id) == 16


def test_upload_corrupt_bytes_400(client):
    resp = client.post("/images", content=b"this is not an image")
    assert resp.status_code == 400


def test_upload_oversize_413():
    config = ServiceConfig(max_bytes=100)
    client = TestClient(create_app(config))
    resp = client.post("/images", content=png_bytes(noise_image(1, 64, 64)))
    assert resp.status_code == 413


def test_candidates_two_peaks(client):
    image_id = upload(client, two_peak_image())
    resp = client.get(f"/images/{image_id}/candidates?k=2&ars=1:1,16:9")
    assert resp.status_code == 200
    body = resp.json()
    assert not body["symmetric"]
    assert len(body["candidates"]) == 2
    scores = [c["score"] for c in body["candidates"]]
    assert scores == sorted(scores, reverse=True)
    # previews equal engine geometry exactly
    for cand in body["candidates"]:
        from salcrop import Point

        p = Point(cand["point"]["x"], cand["point"]["y"])
        for preview in cand["previews"]:
            ar = AspectRatio.parse(preview["ar"])
            rect = crop_around_focal(96, 96, p, ar)
            assert preview["rect"] == {"x": rect.x, "y": rect.y,
                                       "w": rect.w, "h": rect.h}
            assert rect.contains(p)


def test_candidates_k1_is_argmax(client):
    img = two_peak_image()
    image_id = upload(client, img)
    resp = client.get(f"/images/{image_id}/candidates?k=1")
    body = resp.json()
    assert len(body["candidates"]) == 1
    from salcrop import max_salient_point

    m = compute_saliency(img, SaliencyBackend(kind="contrast"), 8)
    point, _ = max_salient_point(m)
    assert body["candidates"][0]["point"] == {"x": point.x, "y": point.y}


def test_candidates_symmetric_image_single_center(client):
    image_id = upload(client, ImageBuffer.solid(64, 64, (120, 120, 120)))
    body = client.get(f"/images/{image_id}/candidates?k=3").json()
    assert body["symmetric"] is True
    assert len(body["candidates"]) == 1
    assert body["candidates"][0]["point"] == {"x": 32, "y": 32}


def test_candidates_unknown_id_404(client):
    assert client.get("/images/feedfeedfeedfeed/candidates").status_code == 404


def test_candidates_bad_parameters_400(client):
    image_id = upload(client, noise_image(2))
    assert client.get(f"/images/{image_id}/candidates?k=0").status_code == 400
    assert client.get(f"/images/{image_id}/candidates?k=99").status_code == 400
    assert client.get(f"/images/{image_id}/candidates?ars=oops").status_code == 400


def test_selection_flow(client):
    img = two_peak_image()
    image_id = upload(client, img)
    resp = client.post(f"/images/{image_id}/selection", json={"x": 70, "y": 70})
    assert resp.status_code == 204
    body = client.get(f"/images/{image_id}/crop?ar=1:1").json()
    assert body["selected"] is True
    assert body["focal"] == {"x": 70, "y": 70}
    rect = crop_around_focal(96, 96, __import__("salcrop").Point(70, 70),
                             AspectRatio(1, 1))
    assert body["rect"] == {"x": rect.x, "y": rect.y, "w": rect.w, "h": rect.h}


def test_selection_out_of_bounds_422(client):
    image_id = upload(client, noise_image(3, 40, 40))
    resp = client.post(f"/images/{image_id}/selection", json={"x": 40, "y": 0})
    assert resp.status_code == 422


def test_selection_resubmission_last_write_wins(client):
    image_id = upload(client, two_peak_image())
    client.post(f"/images/{image_id}/selection", json={"x": 10, "y": 10})
    client.post(f"/images/{image_id}/selection", json={"x": 80, "y": 80})
    body = client.get(f"/images/{image_id}/crop?ar=1:1").json()
    assert body["focal"] == {"x": 80, "y": 80}


def test_crop_without_selection_matches_pipeline(client):
    img = two_peak_image()
    image_id = upload(client, img)
    body = client.get(f"/images/{image_id}/crop?ar=16:9").json()
    assert body["selected"] is False
    spec = crop_pipeline(img, SaliencyBackend(kind="contrast"),
                         CropStrategy(kind="argmax"), [AspectRatio(16, 9)])[0]
    assert body["rect"] == {"x": spec.x, "y": spec.y, "w": spec.w, "h": spec.h}


def test_crop_symmetric_fallback_is_center(client):
    image_id = upload(client, ImageBuffer.solid(100, 60, (10, 10, 10)))
    body = client.get(f"/images/{image_id}/crop?ar=1:1").json()
    assert body["focal"] == {"x": 50, "y": 30}


def test_crop_png_variant_agrees_with_json(client):
    from PIL import Image

    img = two_peak_image()
    image_id = upload(client, img)
    body = client.get(f"/images/{image_id}/crop?ar=1:2").json()
    resp = client.get(f"/images/{image_id}/crop?ar=1:2&format=png")
    assert resp.headers["content-type"] == "image/png"
    with Image.open(io.BytesIO(resp.content)) as out:
        assert out.size == (body["rect"]["w"], body["rect"]["h"])


def test_crop_errors(client):
    image_id = upload(client, noise_image(4))
    assert client.get(f"/images/{image_id}/crop?ar=zero").status_code == 400
    assert client.get(f"/images/{image_id}/crop?ar=1:1&format=tiff").status_code == 400
    assert client.get("/images/0000000000000000/crop?ar=1:1").status_code == 404


def test_saliency_grid_endpoint(client):
    img = two_peak_image()
    image_id = upload(client, img)
    body = client.get(f"/images/{image_id}/saliency").json()
    assert body["grid_w"] == 12 and body["grid_h"] == 12
    assert body["source_w"] == 96 and body["source_h"] == 96
    grid = np.array(body["scores"])
    expected = compute_saliency(img, SaliencyBackend(kind="contrast"), 8).scores
    assert np.allclose(grid, expected)


def test_sessions_isolated(client):
    id_a = upload(client, two_peak_image())
    id_b = upload(client, noise_image(5, 50, 50))
    client.post(f"/images/{id_a}/selection", json={"x": 5, "y": 5})
    assert client.get(f"/images/{id_b}/crop?ar=1:1").json()["selected"] is False


def test_saliency_computed_once_under_concurrency():
    config = ServiceConfig(backend=SaliencyBackend(kind="contrast"))
    app = create_app(config)
    client = TestClient(app)
    image_id = upload(client, noise_image(6, 64, 64))

    def hit(_):
        return client.get(f"/images/{image_id}/candidates?k=2").status_code

    with ThreadPoolExecutor(max_workers=8) as pool:
        codes = list(pool.map(hit, range(16)))
    assert set(codes) == {200}
    assert app.state.store.saliency_computes == 1


def test_ttl_eviction():
    config = ServiceConfig(ttl_seconds=0.05, backend=SaliencyBackend(kind="contrast"))
    client = TestClient(create_app(config))
    image_id = upload(client, noise_image(7))
    assert client.get(f"/images/{image_id}/crop?ar=1:1").status_code == 200
    time.sleep(0.1)
    assert client.get(f"/images/{image_id}/crop?ar=1:1").status_code == 404
