"""Command-line front end.

Subcommands mirror the library surface: saliency map export, batch
cropping, pairwise fairness audits, region listing, score-distribution
statistics, the gaze (head-containment) analysis, and the HTTP service.

Exit codes: 0 on success, 2 on usage or I/O errors, 3 when an audit
raises the disparate-impact flag.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .audit import (
    GazeAnalysisConfig,
    PairAuditConfig,
    audit_pair,
    gaze_analysis,
    ks_gap,
    ecdf_points,
    subgroup_saliency_stats,
)
from .corpus import Corpus, ManifestError, decode_image, encode_image
from .crop import AspectRatio, CropRect, CropStrategy, crop_pipeline, render_crop
from .pfm import pack_pfm_bytes
from .saliency import (
    DEFAULT_GRID_STEP,
    DEFAULT_REGION_THRESHOLD,
    Point,
    SaliencyBackend,
    compute_saliency,
    segment_salient_regions,
)


class CliError(Exception):
    pass


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write(path, text.encode("utf-8"))


def _parse_strategy(text: str, seed: int) -> CropStrategy:
    if text in ("argmax", "sampling", "average", "pad"):
        return CropStrategy(kind=text, seed=seed)
    if text.startswith("topk:"):
        return CropStrategy(kind="topk", k=int(text.split(":", 1)[1]), seed=seed)
    if text.startswith("focal:"):
        try:
            x, y = (int(t) for t in text.split(":", 1)[1].split(","))
        except ValueError:
            raise CliError(f"bad focal strategy {text!r}, expected focal:X,Y")
        return CropStrategy(kind="focal", focal=Point(x, y))
    raise CliError(f"unknown strategy {text!r}")


def _json_report(payload: dict, stable: bool) -> str:
    if not stable:
        payload = {"generated_at": datetime.now(timezone.utc).isoformat(), **payload}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _backend(args) -> SaliencyBackend:
    return SaliencyBackend.parse(args.backend)


# --- subcommands -------------------------------------------------------------


def cmd_saliency(args) -> int:
    image = decode_image(args.image)
    m = compute_saliency(image, _backend(args), args.grid_step)
    _atomic_write(Path(args.out), pack_pfm_bytes(m.scores))
    print(f"wrote {args.out} ({m.grid_w}x{m.grid_h} grid)")
    if args.heatmap:
        from .plotting import render_heatmap_overlay

        render_heatmap_overlay(image, m, args.heatmap)
        print(f"wrote {args.heatmap}")
    return 0


def cmd_crop(args) -> int:
    image = decode_image(args.image)
    ars = [AspectRatio.parse(a) for a in args.ar]
    strategy = _parse_strategy(args.strategy, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    specs = crop_pipeline(image, _backend(args), strategy, ars,
                          grid_step=args.grid_step, rng_seed=args.seed)
    stem = Path(args.image).stem
    crops = []
    for ar, spec in zip(ars, specs):
        out_file = out_dir / f"{stem}_{ar.num}x{ar.den}.png"
        encode_image(render_crop(image, spec), out_file)
        if isinstance(spec, CropRect):
            entry = {"ar": str(ar), "type": "rect",
                     "rect": {"x": spec.x, "y": spec.y, "w": spec.w, "h": spec.h}}
        else:
            entry = {"ar": str(ar), "type": "padded",
                     "canvas": {"w": spec.canvas_w, "h": spec.canvas_h,
                                "offset_x": spec.image_offset_x,
                                "offset_y": spec.image_offset_y}}
        entry["file"] = out_file.name
        crops.append(entry)

    log = {
        "tool_version": __version__,
        "input": str(args.image),
        "source": {"w": image.width, "h": image.height},
        "backend": args.backend,
        "grid_step": args.grid_step,
        "strategy": args.strategy,
        "seed": args.seed,
        "crops": crops,
    }
    _atomic_write_text(out_dir / f"{stem}_crops.json",
                       _json_report(log, args.stable_output))
    print(f"wrote {len(crops)} crop(s) to {out_dir}")
    return 0


def cmd_audit(args) -> int:
    corpus = Corpus.load(args.manifest)
    group_a, group_b = args.pair
    variant, scaled_height = "attach", 256
    if args.variant == "noattach":
        variant = "noattach"
    elif args.variant.startswith("scaled:"):
        variant = "scaled"
        scaled_height = int(args.variant.split(":", 1)[1])
    elif args.variant != "attach":
        raise CliError(f"unknown variant {args.variant!r}")

    config = PairAuditConfig(
        group_a=group_a,
        group_b=group_b,
        n_trials=args.trials,
        seed=args.seed,
        variant=variant,
        scaled_height=scaled_height,
        backend=_backend(args),
        grid_step=args.grid_step,
        epsilon=args.epsilon,
        ci_method="wilson" if args.wilson else "normal",
    )
    report = audit_pair(corpus, config, workers=args.threads)

    report_path = Path(args.report)
    trial_csv = None
    if report.trial_log is not None:
        trial_csv = report_path.with_suffix(".trials.csv")
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["trial", "favored"])
        writer.writerows(enumerate(report.trial_log))
        _atomic_write_text(trial_csv, buf.getvalue())

    payload = {
        "tool_version": __version__,
        "config": {
            "manifest": str(args.manifest),
            "group_a": group_a,
            "group_b": group_b,
            "variant": args.variant,
            "n_trials": args.trials,
            "seed": args.seed,
            "epsilon": args.epsilon,
            "backend": args.backend,
            "grid_step": args.grid_step,
            "ci_method": config.ci_method,
        },
        "report": report.to_dict(),
        "trial_log_csv": trial_csv.name if trial_csv else None,
    }
    _atomic_write_text(report_path, _json_report(payload, args.stable_output))
    print(f"p_favored[{group_a}] = {report.p_favored_a:.4f} "
          f"ci=({report.ci_lo:.4f}, {report.ci_hi:.4f}) "
          f"parity_ratio={report.parity_ratio:.4f} "
          f"flag={'yes' if report.disparate_impact_flag else 'no'}")

    if args.plot:
        from .plotting import plot_audit_report

        plot_audit_report(report, args.plot)
        print(f"wrote {args.plot}")
    if args.plot_data:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["group", "p_favored", "ci_lo", "ci_hi"])
        writer.writerow([group_a, report.p_favored_a, report.ci_lo, report.ci_hi])
        writer.writerow([group_b, 1 - report.p_favored_a,
                         1 - report.ci_hi, 1 - report.ci_lo])
        _atomic_write_text(Path(args.plot_data), buf.getvalue())
        print(f"wrote {args.plot_data}")

    return 3 if report.disparate_impact_flag else 0


def cmd_regions(args) -> int:
    image = decode_image(args.image)
    m = compute_saliency(image, _backend(args), args.grid_step)
    regions = segment_salient_regions(m, args.threshold)
    out = [{
        "bbox": list(r.bbox),
        "peak": {"x": r.peak.x, "y": r.peak.y},
        "peak_score": r.peak_score,
        "mass": r.mass,
        "cell_count": r.cell_count,
    } for r in regions]
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        _atomic_write_text(Path(args.out), text)
        print(f"wrote {args.out} ({len(out)} region(s))")
    else:
        sys.stdout.write(text)
    return 0


def cmd_stats(args) -> int:
    corpus = Corpus.load(args.manifest)
    backend = _backend(args)
    stats = subgroup_saliency_stats(corpus, args.subgroup, backend, args.grid_step)
    values = stats.max_scores if args.stat == "max" else stats.median_scores

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["value", "ecdf"])
    writer.writerows(ecdf_points(values))
    _atomic_write_text(Path(args.out), buf.getvalue())
    print(f"wrote {args.out}")

    other = None
    if args.compare:
        other = subgroup_saliency_stats(corpus, args.compare, backend, args.grid_step)
        gap_max = ks_gap(stats.max_scores, other.max_scores)
        gap_med = ks_gap(stats.median_scores, other.median_scores)
        print(f"ks_gap[max]={gap_max:.4f} ks_gap[median]={gap_med:.4f}")
    if args.plot:
        from .plotting import plot_ecdfs

        plot_ecdfs([stats] + ([other] if other else []), args.plot)
        print(f"wrote {args.plot}")
    return 0


def cmd_gaze(args) -> int:
    corpus = Corpus.load(args.manifest)
    config = GazeAnalysisConfig(
        groups=tuple(args.groups),
        min_hw_ratio=args.min_hw_ratio,
        min_region_count=args.min_regions,
        sample_size=args.sample_size,
        seed=args.seed,
    )
    results = gaze_analysis(corpus, config, _backend(args), args.grid_step)
    payload = {
        "tool_version": __version__,
        "config": {
            "manifest": str(args.manifest),
            "groups": list(config.groups),
            "min_hw_ratio": config.min_hw_ratio,
            "min_region_count": config.min_region_count,
            "sample_size": config.sample_size,
            "seed": config.seed,
            "backend": args.backend,
            "grid_step": args.grid_step,
        },
        "groups": {
            gid: {
                "eligible": r.eligible_count,
                "sampled": len(r.sampled_ids),
                "off_head_count": r.off_head_count,
                "off_head_ids": list(r.off_head_ids),
                "missing_head_box_ids": list(r.missing_head_box_ids),
                "regions": {
                    image_id: [{
                        "bbox": list(reg.bbox),
                        "peak": {"x": reg.peak.x, "y": reg.peak.y},
                        "peak_score": reg.peak_score,
                        "mass": reg.mass,
                        "cell_count": reg.cell_count,
                    } for reg in regs]
                    for image_id, regs in sorted(r.regions.items())
                },
            }
            for gid, r in results.items()
        },
    }
    text = _json_report(payload, args.stable_output)
    if args.out:
        _atomic_write_text(Path(args.out), text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    host, _, port = args.addr.rpartition(":")
    config = ServiceConfig(
        backend=_backend(args),
        grid_step=args.grid_step,
        max_bytes=args.max_bytes,
        ttl_seconds=args.ttl,
        store_dir=Path(args.corpus_dir) if args.corpus_dir else None,
    )
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port))
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master RNG seed")
    common.add_argument("--backend", default="spectral",
                        help="spectral | contrast | external:<map.pfm>")
    common.add_argument("--grid-step", type=int, default=DEFAULT_GRID_STEP,
                        help="saliency grid step in pixels")
    common.add_argument("--stable-output", action="store_true",
                        help="omit timestamps so reports are byte-comparable")

    parser = argparse.ArgumentParser(prog="salcrop",
                                     description="saliency cropping and fairness audits")
    parser.add_argument("--version", action="version", version=f"salcrop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("saliency", parents=[common], help="export a saliency map")
    p.add_argument("image")
    p.add_argument("--out", required=True, help="output PFM path")
    p.add_argument("--heatmap", help="optional false-color overlay PNG")
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("crop", parents=[common], help="crop an image for aspect ratios")
    p.add_argument("image")
    p.add_argument("--ar", action="append", required=True,
                   help="target aspect ratio W:H (repeatable)")
    p.add_argument("--strategy", default="argmax",
                   help="argmax | sampling | average | topk:<k> | focal:<x>,<y> | pad")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("audit", parents=[common], help="pairwise demographic-parity audit")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pair", nargs=2, required=True, metavar=("GROUP_A", "GROUP_B"))
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--variant", default="attach",
                   help="attach | scaled:<height> | noattach")
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--wilson", action="store_true", help="Wilson CI instead of normal")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--report", required=True, help="output JSON path")
    p.add_argument("--plot", help="optional favored-probability figure PNG")
    p.add_argument("--plot-data", help="optional CSV of bar data for external charting")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("regions", parents=[common], help="list salient regions")
    p.add_argument("image")
    p.add_argument("--threshold", type=float, default=DEFAULT_REGION_THRESHOLD)
    p.add_argument("--out", help="output JSON path (default: stdout)")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("stats", parents=[common], help="subgroup score ECDF export")
    p.add_argument("--manifest", required=True)
    p.add_argument("--subgroup", required=True)
    p.add_argument("--stat", choices=("max", "median"), default="max")
    p.add_argument("--compare", help="second subgroup for a KS-gap comparison")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--plot", help="optional ECDF figure PNG")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gaze", parents=[common], help="head-containment analysis")
    p.add_argument("--manifest", required=True)
    p.add_argument("--groups", nargs="+", required=True)
    p.add_argument("--sample-size", type=int, default=100)
    p.add_argument("--min-hw-ratio", type=float, default=1.25)
    p.add_argument("--min-regions", type=int, default=2)
    p.add_argument("--out", help="output JSON path (default: stdout)")
    p.set_defaults(func=cmd_gaze)

    p = sub.add_parser("serve", parents=[common], help="run the crop HTTP service")
    p.add_argument("--addr", default=os.environ.get("SALCROP_ADDR", "127.0.0.1:8080"))
    p.add_argument("--corpus-dir", default=os.environ.get("SALCROP_CORPUS_DIR"),
                   help="directory where uploads are persisted")
    p.add_argument("--max-bytes", type=int,
                   default=int(os.environ.get("SALCROP_MAX_BYTES", 8 * 2**20)))
    p.add_argument("--ttl", type=float,
                   default=float(os.environ.get("SALCROP_TTL", 3600.0)))
    p.set_defaults(func=cmd_serve,
                   backend=os.environ.get("SALCROP_BACKEND", "spectral"))

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ManifestError as e:
        for line in e.errors:
            print(f"error: {line}", file=sys.stderr)
        return 2
    except (CliError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
