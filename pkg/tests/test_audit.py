import numpy as np
import pytest

from salcrop import (
    Corpus,
    GazeAnalysisConfig,
    ImageBuffer,
    PairAuditConfig,
    SaliencyBackend,
    attach_horizontal,
    audit_pair,
    audit_pair_no_attach,
    compute_saliency,
    confidence_interval,
    demographic_parity_verdict,
    ecdf_eval,
    ecdf_points,
    gaze_analysis,
    ks_gap,
    max_salient_point,
    run_pairwise_trial,
    subgroup_saliency_stats,
)
from salcrop.audit import swap_groups
from salcrop.synth import generate_corpus

from conftest import noise_image, write_corpus

CONTRAST = SaliencyBackend(kind="contrast")


def bright_blob_image(seed: int) -> ImageBuffer:
    rng = np.random.default_rng(seed)
    px = np.zeros((48, 48, 3), dtype=np.uint8)
    x, y = rng.integers(8, 32, size=2)
    px[y:y + 8, x:x + 8] = 255
    return ImageBuffer(px)


# --- run_pairwise_trial --------------------------------------------------------


def test_trial_forced_by_feature_side():
    blob = bright_blob_image(0)
    solid = ImageBuffer.solid(48, 48, (0, 0, 0))
    assert run_pairwise_trial(blob, solid, CONTRAST) == "a"
    assert run_pairwise_trial(solid, blob, CONTRAST) == "b"


def test_trial_identical_solids_tie_breaks_to_a():
    solid = ImageBuffer.solid(32, 32, (50, 50, 50))
    assert run_pairwise_trial(solid, solid, CONTRAST) == "a"


def test_trial_matches_exhaustive_scan():
    a, b = bright_blob_image(1), bright_blob_image(2)
    composite, boundary = attach_horizontal(a, b)
    m = compute_saliency(composite, CONTRAST, 8)
    best = max(
        ((m.scores[j, i], -j, -i, m.cell_center(i, j))
         for j in range(m.grid_h) for i in range(m.grid_w)),
    )
    expected = "a" if best[3].x < boundary else "b"
    assert run_pairwise_trial(a, b, CONTRAST) == expected


def test_trial_vertical_axis():
    blob = bright_blob_image(3)
    solid = ImageBuffer.solid(48, 48, (0, 0, 0))
    assert run_pairwise_trial(blob, solid, CONTRAST, axis="vertical") == "a"
    assert run_pairwise_trial(solid, blob, CONTRAST, axis="vertical") == "b"


# --- audit_pair ----------------------------------------------------------------


@pytest.fixture
def forced_corpus(tmp_path):
    groups = {
        "blob": [bright_blob_image(s) for s in range(4)],
        "flat": [ImageBuffer.solid(48, 48, (0, 0, 0)) for _ in range(4)],
    }
    return Corpus.load(write_corpus(tmp_path, groups))


def test_audit_forced_outcome(forced_corpus):
    config = PairAuditConfig("blob", "flat", n_trials=200, seed=1, backend=CONTRAST)
    report = audit_pair(forced_corpus, config)
    assert report.p_favored_a == 1.0
    assert report.parity_ratio == 0.0
    assert report.disparate_impact_flag
    assert report.n == 200
    assert len(report.trial_log) == 200


def test_audit_deterministic_and_parallel_equal(forced_corpus, tmp_path):
    groups = {
        "x": [noise_image(s, 40, 40) for s in range(6)],
        "y": [noise_image(100 + s, 40, 40) for s in range(6)],
    }
    corpus = Corpus.load(write_corpus(tmp_path / "noise", groups))
    config = PairAuditConfig("x", "y", n_trials=60, seed=3, backend=CONTRAST)
    r1 = audit_pair(corpus, config, workers=1)
    r2 = audit_pair(corpus, config, workers=4)
    assert r1 == r2


def test_audit_swap_maps_p_to_complement(tmp_path):
    groups = {
        "x": [noise_image(s, 40, 40) for s in range(5)],
        "y": [noise_image(50 + s, 40, 40) for s in range(5)],
    }
    corpus = Corpus.load(write_corpus(tmp_path, groups))
    config = PairAuditConfig("x", "y", n_trials=80, seed=7, backend=CONTRAST)
    r = audit_pair(corpus, config)
    r_swapped = audit_pair(corpus, swap_groups(config))
    assert r_swapped.p_favored_a == 1.0 - r.p_favored_a
    assert r_swapped.trial_log == r.trial_log  # identical trials, relabeled


def test_audit_scaled_variant_runs(tmp_path):
    groups = {
        "x": [noise_image(1, 30, 60), noise_image(2, 50, 40)],
        "y": [noise_image(3, 40, 40), noise_image(4, 20, 80)],
    }
    corpus = Corpus.load(write_corpus(tmp_path, groups))
    config = PairAuditConfig("x", "y", n_trials=20, seed=0, variant="scaled",
                             scaled_height=64, backend=CONTRAST)
    report = audit_pair(corpus, config)
    assert report.n == 20
    assert 0.0 <= report.p_favored_a <= 1.0


def test_audit_empty_group_rejected(tmp_path):
    groups = {"x": [noise_image(0)], "y": [noise_image(1)]}
    manifest = write_corpus(tmp_path, groups)
    corpus = Corpus.load(manifest)
    config = PairAuditConfig("x", "nope", n_trials=5, backend=CONTRAST)
    with pytest.raises(KeyError):
        audit_pair(corpus, config)
    with pytest.raises(ValueError):
        PairAuditConfig("x", "y", n_trials=0)


def test_audit_null_hypothesis_covers_half(tmp_path):
    # both groups drawn from the same noise distribution: with a corpus large
    # enough for the pairwise win rate to concentrate, p hovers around 0.5
    groups = {
        "x": [noise_image(s, 24, 24) for s in range(150)],
        "y": [noise_image(1000 + s, 24, 24) for s in range(150)],
    }
    corpus = Corpus.load(write_corpus(tmp_path, groups))
    config = PairAuditConfig("x", "y", n_trials=2000, seed=11, backend=CONTRAST)
    report = audit_pair(corpus, config)
    assert abs(report.p_favored_a - 0.5) < 0.06
    assert report.ci_lo < 0.5 + 0.07 and report.ci_hi > 0.5 - 0.07


# --- no-attach exhaustive --------------------------------------------------------


def brute_force_no_attach(corpus, group_a, group_b, backend):
    def max_of(image_id):
        m = compute_saliency(corpus.image(image_id), backend, 8)
        return max_salient_point(m)[1]

    a_max = [max_of(i) for i in corpus.subgroup(group_a).members]
    b_max = [max_of(i) for i in corpus.subgroup(group_b).members]
    total = 0.0
    for a in a_max:
        for b in b_max:
            if a > b:
                total += 1.0
            elif a == b:
                total += 0.5
    return total / (len(a_max) * len(b_max))


def block_of_strength(value: int) -> ImageBuffer:
    px = np.zeros((16, 16, 3), dtype=np.uint8)
    px[:4, :4] = value
    return ImageBuffer(px)


def test_no_attach_win_loss(tmp_path):
    # group maxima {high, low} vs {mid}: one win, one loss -> p = 0.5
    groups = {"x": [block_of_strength(255), block_of_strength(60)],
              "y": [block_of_strength(128)]}
    corpus = Corpus.load(write_corpus(tmp_path, groups))
    config = PairAuditConfig("x", "y", variant="noattach", backend=CONTRAST)
    report = audit_pair_no_attach(corpus, config)
    assert report.p_favored_a == 0.5
    assert report.n == 2


def test_no_attach_tie_half_credit(tmp_path):
    img = noise_image(5, 24, 24)
    groups = {"x": [img, img], "y": [img]}
    corpus = Corpus.load(write_corpus(tmp_path, groups))
    config = PairAuditConfig("x", "y", variant="noattach", backend=CONTRAST)
    report = audit_pair_no_attach(corpus, config)
    assert report.p_favored_a == 0.5
    assert report.n == 2
    assert (report.ci_lo, report.ci_hi) == (0.5, 0.5)
    assert report.trial_log is None


def test_no_attach_equals_brute_force(tmp_path):
    for seed in range(3):
        root = tmp_path / f"c{seed}"
        root.mkdir()
        groups = {
            "x": [noise_image(seed * 100 + s, 24, 24) for s in range(10)],
            "y": [noise_image(seed * 100 + 50 + s, 24, 24) for s in range(10)],
        }
        corpus = Corpus.load(write_corpus(root, groups))
        config = PairAuditConfig("x", "y", variant="noattach", backend=CONTRAST)
        report = audit_pair_no_attach(corpus, config)
        assert report.p_favored_a == brute_force_no_attach(corpus, "x", "y", CONTRAST)


def test_audit_pair_dispatches_noattach(tmp_path):
    groups = {"x": [noise_image(0)], "y": [noise_image(1)]}
    corpus = Corpus.load(write_corpus(tmp_path, groups))
    config = PairAuditConfig("x", "y", variant="noattach", backend=CONTRAST)
    assert audit_pair(corpus, config) == audit_pair_no_attach(corpus, config)


# --- confidence intervals ---------------------------------------------------------


def test_ci_paper_half_widths():
    lo, hi = confidence_interval(0.5, 10000)
    assert (hi - lo) / 2 == pytest.approx(0.0098, abs=1e-4)
    lo, hi = confidence_interval(0.5, 5000)
    assert (hi - lo) / 2 == pytest.approx(0.01386, abs=1e-4)


def test_ci_degenerate_extremes():
    assert confidence_interval(1.0, 50) == (1.0, 1.0)
    assert confidence_interval(0.0, 50) == (0.0, 0.0)


def test_ci_half_width_formula_and_monotonicity():
    prev = None
    for n in (10, 100, 1000, 10000, 100000):
        lo, hi = confidence_interval(0.5, n)
        half = (hi - lo) / 2
        assert abs(half - 1.959964 * 0.5 / np.sqrt(n)) < 1e-12
        if prev is not None:
            assert half < prev
        prev = half


def test_ci_wilson_contains_p_and_is_narrower_at_extremes():
    lo, hi = confidence_interval(0.99, 20, method="wilson")
    assert 0 <= lo <= 0.99 <= hi <= 1
    n_lo, n_hi = confidence_interval(0.99, 20, method="normal")
    assert hi <= n_hi + 1e-12


def test_ci_other_levels_via_scipy():
    lo, hi = confidence_interval(0.5, 100, level=0.99)
    assert (hi - lo) / 2 == pytest.approx(2.575829 * 0.05, abs=1e-5)


# --- parity verdict ---------------------------------------------------------------


def test_verdict_parity():
    flag, ratio = demographic_parity_verdict(0.5, 0.2)
    assert ratio == 1.0 and not flag


def test_verdict_paper_example():
    flag, ratio = demographic_parity_verdict(0.635, 0.2)
    assert ratio == pytest.approx(0.365 / 0.635)
    assert flag


def test_verdict_total_favoritism():
    flag, ratio = demographic_parity_verdict(1.0, 0.5)
    assert ratio == 0.0 and flag


def test_verdict_symmetric_in_p():
    for p in (0.0, 0.2, 0.41, 0.5, 0.77, 1.0):
        f1, r1 = demographic_parity_verdict(p, 0.3)
        f2, r2 = demographic_parity_verdict(1 - p, 0.3)
        assert f1 == f2
        assert r1 == pytest.approx(r2, abs=1e-12)
        assert 0.0 <= r1 <= 1.0


# --- ECDF / KS ---------------------------------------------------------------------


def test_ecdf_definition():
    assert ecdf_eval(np.array([1.0, 2.0, 3.0]), 2.0) == pytest.approx(2 / 3)


def test_ecdf_points_step_shape():
    pts = ecdf_points(np.array([3.0, 1.0, 1.0, 2.0]))
    assert pts == [(1.0, 0.5), (2.0, 0.75), (3.0, 1.0)]
    fracs = [f for _, f in pts]
    assert fracs == sorted(fracs)
    assert fracs[-1] == 1.0


def test_ks_gap_identical_zero():
    x = np.array([0.3, 0.7, 1.1])
    assert ks_gap(x, x) == 0.0


def brute_force_ks(a, b):
    pts = np.concatenate([a, b])
    return max(abs((a <= t).mean() - (b <= t).mean()) for t in pts)


def test_ks_gap_matches_brute_force():
    rng = np.random.default_rng(8)
    for _ in range(5):
        a = rng.normal(size=30)
        b = rng.normal(size=45) + rng.uniform(0, 2)
        assert ks_gap(a, b) == pytest.approx(brute_force_ks(a, b))


def test_ks_shifted_distribution():
    a = np.arange(10.0)
    b = a + 1.0
    assert ks_gap(a, b) == pytest.approx(brute_force_ks(a, b))


# --- subgroup stats ------------------------------------------------------------------


def test_subgroup_stats_shapes(tmp_path):
    groups = {"x": [noise_image(s, 24, 24) for s in range(5)]}
    corpus = Corpus.load(write_corpus(tmp_path, groups))
    stats = subgroup_saliency_stats(corpus, "x", CONTRAST)
    assert stats.max_scores.shape == (5,)
    assert stats.median_scores.shape == (5,)
    assert np.all(stats.max_scores >= stats.median_scores)


def test_subgroup_stats_identical_groups_gap_zero(tmp_path):
    imgs = [noise_image(s, 24, 24) for s in range(4)]
    corpus = Corpus.load(write_corpus(tmp_path, {"x": imgs, "y": imgs}))
    sx = subgroup_saliency_stats(corpus, "x", CONTRAST)
    sy = subgroup_saliency_stats(corpus, "y", CONTRAST)
    assert ks_gap(sx.max_scores, sy.max_scores) == 0.0


# --- gaze analysis -------------------------------------------------------------------


def test_gaze_head_only_fixtures_zero_off_head(tmp_path):
    manifest = generate_corpus(tmp_path / "plain", {"m": 230, "f": 200},
                               n_per_group=12, background_luma=16, seed=2)
    corpus = Corpus(manifest)
    config = GazeAnalysisConfig(groups=("m", "f"), sample_size=12, seed=0)
    results = gaze_analysis(corpus, config, CONTRAST)
    for gid in ("m", "f"):
        r = results[gid]
        assert r.eligible_count == 12
        assert r.off_head_count == 0
        assert len(r.sampled_ids) == 12
        assert set(r.regions) == set(r.sampled_ids)
        assert all(len(regs) >= 2 for regs in r.regions.values())


def test_gaze_jersey_patch_detected(tmp_path):
    manifest = generate_corpus(tmp_path / "jersey", {"m": 230},
                               n_per_group=8, background_luma=16,
                               torso_patch_luma=0, patch_fraction=0.5, seed=4)
    corpus = Corpus(manifest)
    config = GazeAnalysisConfig(groups=("m",), sample_size=8, seed=0)
    results = gaze_analysis(corpus, config, CONTRAST)
    planted = {e.image_id for e in manifest.entries if e.attributes["patch"] == "yes"}
    assert set(results["m"].off_head_ids) == planted


def test_gaze_aspect_filter_excludes_wide_images(tmp_path):
    wide = [noise_image(s, 80, 40) for s in range(3)]
    corpus = Corpus.load(write_corpus(tmp_path, {"w": wide}))
    config = GazeAnalysisConfig(groups=("w",), sample_size=10, seed=0)
    results = gaze_analysis(corpus, config, CONTRAST)
    assert results["w"].eligible_count == 0
    assert results["w"].sampled_ids == ()


def test_gaze_missing_head_box_reported(tmp_path):
    tall = [noise_image(s, 32, 64) for s in range(3)]
    manifest = write_corpus(tmp_path, {"t": tall},
                            head_boxes={"t": [[0, 0, 10, 10], None, None]})
    corpus = Corpus.load(manifest)
    config = GazeAnalysisConfig(groups=("t",), sample_size=3, seed=0)
    results = gaze_analysis(corpus, config, CONTRAST)
    r = results["t"]
    assert len(r.missing_head_box_ids) + len(r.sampled_ids) >= len(r.missing_head_box_ids)
    assert set(r.missing_head_box_ids) <= set(r.sampled_ids)
    assert r.off_head_count <= len(r.sampled_ids)


def test_gaze_single_region_images_excluded(tmp_path):
    # a lone blob on flat background has exactly one salient region
    tall = []
    for s in range(3):
        px = np.zeros((64, 32, 3), dtype=np.uint8)
        px[8:16, 8:16] = 255
        tall.append(ImageBuffer(px))
    corpus = Corpus.load(write_corpus(tmp_path, {"t": tall},
                                      head_boxes={"t": [[0, 0, 32, 32]] * 3}))
    config = GazeAnalysisConfig(groups=("t",), sample_size=3, seed=0)
    results = gaze_analysis(corpus, config, CONTRAST)
    assert results["t"].eligible_count == 0
