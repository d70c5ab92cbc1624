import numpy as np
import pytest

from salcrop import Corpus, compute_saliency, max_salient_point
from salcrop.saliency import SaliencyBackend
from salcrop.synth import generate_corpus

CONTRAST = SaliencyBackend(kind="contrast")


def test_generation_is_deterministic(tmp_path):
    m1 = generate_corpus(tmp_path / "a", {"g": 200}, n_per_group=3, seed=5)
    m2 = generate_corpus(tmp_path / "b", {"g": 200}, n_per_group=3, seed=5)
    for e1, e2 in zip(m1.entries, m2.entries):
        assert e1.image_id == e2.image_id
        assert e1.head_box == e2.head_box
        assert e1.path.read_bytes() == e2.path.read_bytes()


def test_different_seeds_differ(tmp_path):
    m1 = generate_corpus(tmp_path / "a", {"g": 200}, n_per_group=1, seed=1)
    m2 = generate_corpus(tmp_path / "b", {"g": 200}, n_per_group=1, seed=2)
    assert m1.entries[0].path.read_bytes() != m2.entries[0].path.read_bytes()


def test_manifest_structure(tmp_path):
    m = generate_corpus(tmp_path / "c", {"light": 230, "dark": 64},
                        n_per_group=4, seed=0)
    assert set(m.subgroups) == {"light", "dark"}
    assert len(m.subgroups["light"].members) == 4
    for e in m.entries:
        assert e.head_box is not None
        assert e.attributes["patch"] == "no"


def test_patch_fraction_recorded(tmp_path):
    m = generate_corpus(tmp_path / "p", {"g": 220}, n_per_group=4,
                        torso_patch_luma=0, patch_fraction=0.5, seed=0)
    flags = [e.attributes["patch"] for e in m.entries]
    assert flags == ["yes", "yes", "no", "no"]


def test_luma_validation(tmp_path):
    with pytest.raises(ValueError):
        generate_corpus(tmp_path / "x", {"g": 300}, n_per_group=1)
    with pytest.raises(ValueError):
        generate_corpus(tmp_path / "y", {"g": 100}, n_per_group=1,
                        background_luma=-1)


def test_head_is_argmax_on_plain_figures(tmp_path):
    m = generate_corpus(tmp_path / "h", {"g": 230}, n_per_group=10,
                        background_luma=16, seed=3)
    corpus = Corpus(m)
    for e in m.entries:
        focal, _ = max_salient_point(compute_saliency(corpus.image(e.image_id),
                                                      CONTRAST, 8))
        x, y, w, h = e.head_box
        assert x <= focal.x < x + w and y <= focal.y < y + h


def test_jersey_patch_steals_argmax(tmp_path):
    m = generate_corpus(tmp_path / "j", {"g": 230}, n_per_group=10,
                        background_luma=16, torso_patch_luma=0, seed=3)
    corpus = Corpus(m)
    for e in m.entries:
        focal, _ = max_salient_point(compute_saliency(corpus.image(e.image_id),
                                                      CONTRAST, 8))
        x, y, w, h = e.head_box
        assert not (x <= focal.x < x + w and y <= focal.y < y + h)


def test_images_are_grayscale_with_configured_lumas(tmp_path):
    m = generate_corpus(tmp_path / "g", {"g": 200}, n_per_group=1,
                        background_luma=16, seed=0)
    img = Corpus(m).image("g_0000")
    px = img.pixels
    assert np.array_equal(px[..., 0], px[..., 1])
    assert np.array_equal(px[..., 0], px[..., 2])
    assert {16, 200} <= set(np.unique(px[..., 0]).tolist())
