"""Demographic-parity audits of saliency-favored exposure, plus the
saliency-distribution statistics and the head/body gaze analysis.

The core experiment: draw one image from each of two subgroups, attach
them side by side, run saliency on the composite, and record which side
holds the maximum point.  Repeating this gives the probability p that the
first group is "favored"; demographic parity corresponds to p = 0.5, and
the disparate-impact flag fires when min(p, 1-p)/max(p, 1-p) drops to
1 - epsilon or below.

Trials are reproducible and order-independent: trial t draws from a
stream seeded by derive_seed(config.seed, t), and pairs are sampled in a
canonical group order so that swapping the two groups relabels the exact
same trials (p maps to 1 - p bit-exactly).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import sqrt

import numpy as np

from .corpus import Corpus, Subgroup, sample_uniform
from .image import RGB, BLACK, ImageBuffer, attach_horizontal, attach_vertical, scale_to_height
from .rng import Rng, derive_seed, seed_from_text
from .saliency import (
    DEFAULT_GRID_STEP,
    DEFAULT_REGION_THRESHOLD,
    SaliencyBackend,
    SalientRegion,
    compute_saliency,
    max_salient_point,
    segment_salient_regions,
)

Z_95 = 1.959964  # two-sided 95% normal quantile, pinned


@dataclass(frozen=True)
class PairAuditConfig:
    group_a: str
    group_b: str
    n_trials: int = 10000
    seed: int = 0
    variant: str = "attach"  # "attach" | "scaled" | "noattach"
    scaled_height: int = 256
    backend: SaliencyBackend = field(default_factory=SaliencyBackend)
    grid_step: int = DEFAULT_GRID_STEP
    epsilon: float = 0.2
    ci_level: float = 0.95
    ci_method: str = "normal"  # "normal" | "wilson"
    attach_axis: str = "horizontal"
    attach_align: str = "top"
    pad_color: RGB = BLACK

    def __post_init__(self):
        if self.variant not in ("attach", "scaled", "noattach"):
            raise ValueError(f"unknown audit variant {self.variant!r}")
        if self.variant != "noattach" and self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must be in [0, 1)")
        if self.attach_axis not in ("horizontal", "vertical"):
            raise ValueError(f"unknown attach axis {self.attach_axis!r}")


@dataclass(frozen=True)
class AuditReport:
    group_a: str
    group_b: str
    variant: str
    n: int  # trial count, or pair count for the exhaustive variant
    p_favored_a: float
    ci_lo: float
    ci_hi: float
    parity_ratio: float
    disparate_impact_flag: bool
    epsilon: float
    ci_level: float
    trial_log: tuple[str, ...] | None  # favored group id per trial

    def to_dict(self) -> dict:
        return {
            "group_a": self.group_a,
            "group_b": self.group_b,
            "variant": self.variant,
            "n": self.n,
            "p_favored_a": self.p_favored_a,
            "ci": [self.ci_lo, self.ci_hi],
            "parity_ratio": self.parity_ratio,
            "disparate_impact_flag": self.disparate_impact_flag,
            "epsilon": self.epsilon,
            "ci_level": self.ci_level,
        }


def confidence_interval(
    p_hat: float, n: int, level: float = 0.95, method: str = "normal"
) -> tuple[float, float]:
    """Two-sided binomial interval for an observed proportion.

    The default is the normal approximation p +- z*sqrt(p(1-p)/n) clamped
    to [0, 1]; z is pinned to 1.959964 at the 95% level.  "wilson" gives
    the Wilson score interval, better behaved at small n or extreme p.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= p_hat <= 1:
        raise ValueError("p_hat must be a probability")
    z = _z_quantile(level)
    if method == "normal":
        half = z * sqrt(p_hat * (1 - p_hat) / n)
        return max(0.0, p_hat - half), min(1.0, p_hat + half)
    if method == "wilson":
        denom = 1 + z * z / n
        center = (p_hat + z * z / (2 * n)) / denom
        half = z * sqrt(p_hat * (1 - p_hat) / n + z * z / (4 * n * n)) / denom
        return max(0.0, center - half), min(1.0, center + half)
    raise ValueError(f"unknown CI method {method!r}")


def _z_quantile(level: float) -> float:
    if not 0 < level < 1:
        raise ValueError("confidence level must be in (0, 1)")
    if abs(level - 0.95) < 1e-12:
        return Z_95
    from scipy.stats import norm

    return float(norm.ppf(0.5 + level / 2))


def demographic_parity_verdict(p_favored: float, epsilon: float) -> tuple[bool, float]:
    """(disparate_impact_flag, parity_ratio) for a favored probability.

    In the pairwise design the two selection rates are p and 1-p, so the
    parity ratio min(p, 1-p)/max(p, 1-p) already covers both orderings of
    the groups.  The flag fires when the ratio is <= 1 - epsilon.
    """
    if not 0 <= p_favored <= 1:
        raise ValueError("p_favored must be a probability")
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must be in [0, 1)")
    lo, hi = min(p_favored, 1 - p_favored), max(p_favored, 1 - p_favored)
    ratio = 0.0 if hi == 0 else lo / hi
    return ratio <= 1 - epsilon, ratio


def run_pairwise_trial(
    img_a: ImageBuffer,
    img_b: ImageBuffer,
    backend: SaliencyBackend,
    grid_step: int = DEFAULT_GRID_STEP,
    pad_color: RGB = BLACK,
    axis: str = "horizontal",
    align: str = "top",
) -> str:
    """Attach two images, find the composite max, return the favored side.

    Returns "a" when the maximum point lies strictly left of (above, for
    vertical attachment) the boundary; a point exactly on the boundary
    coordinate belongs to the second image.
    """
    if axis == "horizontal":
        composite, boundary = attach_horizontal(img_a, img_b, pad_color, align)
        point, _ = max_salient_point(compute_saliency(composite, backend, grid_step))
        return "a" if point.x < boundary else "b"
    composite, boundary = attach_vertical(img_a, img_b, pad_color, align)
    point, _ = max_salient_point(compute_saliency(composite, backend, grid_step))
    return "a" if point.y < boundary else "b"


def _finish_report(config: PairAuditConfig, n: int, p: float,
                   ci: tuple[float, float], trial_log) -> AuditReport:
    flag, ratio = demographic_parity_verdict(p, config.epsilon)
    return AuditReport(
        group_a=config.group_a,
        group_b=config.group_b,
        variant=config.variant,
        n=n,
        p_favored_a=p,
        ci_lo=ci[0],
        ci_hi=ci[1],
        parity_ratio=ratio,
        disparate_impact_flag=flag,
        epsilon=config.epsilon,
        ci_level=config.ci_level,
        trial_log=trial_log,
    )


def audit_pair(corpus: Corpus, config: PairAuditConfig, workers: int = 1) -> AuditReport:
    """Sampled pairwise audit ("attach" and "scaled" variants).

    Images are drawn with replacement, independently per trial.  The pair
    for trial t is sampled in canonical (sorted) group order so that
    auditing (B, A) relabels the identical trials of (A, B).
    """
    if config.variant == "noattach":
        return audit_pair_no_attach(corpus, config)
    group_a = corpus.subgroup(config.group_a)
    group_b = corpus.subgroup(config.group_b)
    for g in (group_a, group_b):
        if not g.members:
            raise ValueError(f"subgroup {g.id!r} is empty")

    first, second = sorted((group_a, group_b), key=lambda g: g.id)

    def run_trial(t: int) -> str:
        rng = Rng(derive_seed(config.seed, t))
        id_first = first.members[rng.randrange(len(first.members))]
        id_second = second.members[rng.randrange(len(second.members))]
        img_first = corpus.image(id_first)
        img_second = corpus.image(id_second)
        if config.variant == "scaled":
            img_first = scale_to_height(img_first, config.scaled_height)
            img_second = scale_to_height(img_second, config.scaled_height)
        side = run_pairwise_trial(
            img_first, img_second, config.backend, config.grid_step,
            config.pad_color, config.attach_axis, config.attach_align,
        )
        return first.id if side == "a" else second.id

    indices = range(config.n_trials)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            favored = list(pool.map(run_trial, indices))
    else:
        favored = [run_trial(t) for t in indices]

    wins_a = sum(1 for g in favored if g == config.group_a)
    p = wins_a / config.n_trials
    ci = confidence_interval(p, config.n_trials, config.ci_level, config.ci_method)
    return _finish_report(config, config.n_trials, p, ci, tuple(favored))


def audit_pair_no_attach(corpus: Corpus, config: PairAuditConfig) -> AuditReport:
    """Exhaustive variant: each image keeps its own maximum saliency score,
    and every ordered pair across the two groups is compared.

    Ties split half to each side, preserving p(A) + p(B) = 1.  The result
    is exact, so the CI degenerates to the point value.
    """
    group_a = corpus.subgroup(config.group_a)
    group_b = corpus.subgroup(config.group_b)
    for g in (group_a, group_b):
        if not g.members:
            raise ValueError(f"subgroup {g.id!r} is empty")

    def max_score(image_id: str) -> float:
        m = compute_saliency(corpus.image(image_id), config.backend, config.grid_step)
        return max_salient_point(m)[1]

    cache: dict[str, float] = {}
    for image_id in (*group_a.members, *group_b.members):
        if image_id not in cache:
            cache[image_id] = max_score(image_id)

    wins = ties = 0
    for a_id in group_a.members:
        for b_id in group_b.members:
            if cache[a_id] > cache[b_id]:
                wins += 1
            elif cache[a_id] == cache[b_id]:
                ties += 1
    n_pairs = len(group_a.members) * len(group_b.members)
    p = (wins + 0.5 * ties) / n_pairs
    return _finish_report(config, n_pairs, p, (p, p), None)


def swap_groups(config: PairAuditConfig) -> PairAuditConfig:
    return replace(config, group_a=config.group_b, group_b=config.group_a)


# --- saliency-score distributions ------------------------------------------


@dataclass(frozen=True)
class SubgroupSaliencyStats:
    subgroup_id: str
    image_ids: tuple[str, ...]
    max_scores: np.ndarray
    median_scores: np.ndarray


def subgroup_saliency_stats(
    corpus: Corpus,
    subgroup_id: str,
    backend: SaliencyBackend,
    grid_step: int = DEFAULT_GRID_STEP,
) -> SubgroupSaliencyStats:
    """Per-image maximum and median cell scores for a subgroup."""
    sg = corpus.subgroup(subgroup_id)
    if not sg.members:
        raise ValueError(f"subgroup {subgroup_id!r} is empty")
    maxima, medians = [], []
    for image_id in sg.members:
        m = compute_saliency(corpus.image(image_id), backend, grid_step)
        maxima.append(float(m.scores.max()))
        medians.append(float(np.median(m.scores)))
    return SubgroupSaliencyStats(
        subgroup_id=subgroup_id,
        image_ids=sg.members,
        max_scores=np.array(maxima),
        median_scores=np.array(medians),
    )


def ecdf_points(values: np.ndarray) -> list[tuple[float, float]]:
    """The ECDF as (value, cumulative fraction) steps over unique values."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    if n == 0:
        raise ValueError("ECDF of an empty sample")
    uniq, counts = np.unique(v, return_counts=True)
    cum = np.cumsum(counts) / n
    return list(zip(uniq.tolist(), cum.tolist()))


def ecdf_eval(values: np.ndarray, x: float) -> float:
    """Fraction of samples <= x."""
    v = np.sort(np.asarray(values, dtype=float))
    return float(np.searchsorted(v, x, side="right")) / v.size


def ks_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Maximum vertical gap between two ECDFs (the two-sample KS statistic)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    points = np.concatenate([a, b])
    fa = np.searchsorted(a, points, side="right") / a.size
    fb = np.searchsorted(b, points, side="right") / b.size
    return float(np.abs(fa - fb).max())


# --- gaze (head containment) analysis ---------------------------------------


@dataclass(frozen=True)
class GazeAnalysisConfig:
    groups: tuple[str, ...]
    min_hw_ratio: float = 1.25
    min_region_count: int = 2
    sample_size: int = 100
    seed: int = 0
    region_threshold: float = DEFAULT_REGION_THRESHOLD

    def __post_init__(self):
        if self.min_hw_ratio <= 0:
            raise ValueError("min_hw_ratio must be positive")


@dataclass(frozen=True)
class GroupGazeResult:
    group: str
    eligible_count: int
    sampled_ids: tuple[str, ...]
    off_head_ids: tuple[str, ...]
    missing_head_box_ids: tuple[str, ...]
    regions: dict[str, tuple[SalientRegion, ...]]

    @property
    def off_head_count(self) -> int:
        return len(self.off_head_ids)


def gaze_analysis(
    corpus: Corpus,
    config: GazeAnalysisConfig,
    backend: SaliencyBackend,
    grid_step: int = DEFAULT_GRID_STEP,
) -> dict[str, GroupGazeResult]:
    """Head-containment check over full-body-like images.

    Per group: keep images whose height/width ratio and salient-region
    count pass the thresholds, sample up to sample_size of them, and mark
    an image "off head" when the argmax focal point falls outside its
    manifest head_box.  Images without a head_box are reported and
    skipped.
    """
    results = {}
    for gid in config.groups:
        sg = corpus.subgroup(gid)
        maps = {}
        eligible = []
        regions_by_id = {}
        for image_id in sg.members:
            img = corpus.image(image_id)
            if img.height / img.width < config.min_hw_ratio:
                continue
            m = compute_saliency(img, backend, grid_step)
            regions = segment_salient_regions(m, config.region_threshold)
            if len(regions) < config.min_region_count:
                continue
            maps[image_id] = m
            regions_by_id[image_id] = tuple(regions)
            eligible.append(image_id)

        n_sample = min(config.sample_size, len(eligible))
        pseudo = Subgroup(id=f"{gid}/eligible", where={}, members=tuple(eligible))
        sampled = (
            sample_uniform(pseudo, seed_from_text(config.seed, gid), n_sample,
                           with_replacement=False)
            if eligible else []
        )

        off_head, missing = [], []
        for image_id in sampled:
            head_box = corpus.entry(image_id).head_box
            if head_box is None:
                missing.append(image_id)
                continue
            point, _ = max_salient_point(maps[image_id])
            x, y, w, h = head_box
            if not (x <= point.x < x + w and y <= point.y < y + h):
                off_head.append(image_id)

        results[gid] = GroupGazeResult(
            group=gid,
            eligible_count=len(eligible),
            sampled_ids=tuple(sampled),
            off_head_ids=tuple(off_head),
            missing_head_box_ids=tuple(missing),
            regions={i: regions_by_id[i] for i in sampled},
        )
    return results
