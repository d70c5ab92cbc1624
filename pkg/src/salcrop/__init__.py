"""salcrop: saliency-based image cropping with a fairness audit harness."""

from .audit import (
    AuditReport,
    GazeAnalysisConfig,
    PairAuditConfig,
    audit_pair,
    audit_pair_no_attach,
    confidence_interval,
    demographic_parity_verdict,
    ecdf_eval,
    ecdf_points,
    gaze_analysis,
    ks_gap,
    run_pairwise_trial,
    subgroup_saliency_stats,
)
from .corpus import (
    Corpus,
    CorpusManifest,
    ManifestError,
    Subgroup,
    decode_image,
    encode_image,
    load_manifest,
    sample_uniform,
)
from .crop import (
    AspectRatio,
    CropRect,
    CropStrategy,
    PaddedCanvas,
    crop_around_focal,
    crop_pipeline,
    exposure_experiment,
    pad_to_aspect,
    render_crop,
    select_focal,
)
from .image import ImageBuffer, attach_horizontal, attach_vertical, scale_to_height
from .pfm import read_pfm, write_pfm
from .saliency import (
    Point,
    SaliencyBackend,
    SaliencyMap,
    SalientRegion,
    compute_saliency,
    is_horizontally_symmetric,
    max_salient_point,
    segment_salient_regions,
    top_k_salient_points,
)
from .synth import generate_corpus

__version__ = "0.1.0"

__all__ = [
    "AspectRatio",
    "AuditReport",
    "Corpus",
    "CorpusManifest",
    "CropRect",
    "CropStrategy",
    "GazeAnalysisConfig",
    "ImageBuffer",
    "ManifestError",
    "PaddedCanvas",
    "PairAuditConfig",
    "Point",
    "SaliencyBackend",
    "SaliencyMap",
    "SalientRegion",
    "Subgroup",
    "attach_horizontal",
    "attach_vertical",
    "audit_pair",
    "audit_pair_no_attach",
    "compute_saliency",
    "confidence_interval",
    "crop_around_focal",
    "crop_pipeline",
    "decode_image",
    "demographic_parity_verdict",
    "ecdf_eval",
    "ecdf_points",
    "encode_image",
    "exposure_experiment",
    "gaze_analysis",
    "generate_corpus",
    "is_horizontally_symmetric",
    "ks_gap",
    "load_manifest",
    "max_salient_point",
    "pad_to_aspect",
    "read_pfm",
    "render_crop",
    "run_pairwise_trial",
    "sample_uniform",
    "scale_to_height",
    "segment_salient_regions",
    "select_focal",
    "subgroup_saliency_stats",
    "top_k_salient_points",
    "write_pfm",
]
