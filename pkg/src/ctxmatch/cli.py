"""Command-line front end.

Subcommands: ``synth`` (generate a scene), ``match`` (blob matching),
``filter`` (spatial or threshold filtering), ``fit`` (1SAC model filtering),
``eval`` (metrics against a ground truth) and ``pipeline`` (the whole chain
over a batch of pairs). Exit codes: 0 success, 2 I/O failure, 3 parse
failure, 4 degenerate geometry.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as ctxio
from .blob import BlobMatcher
from .core import MatchSet, PairContext
from .dtm import DtmFilter
from .errors import DegenerateGeometryError, ParseError
from .evaluation import average_precision, score_pair
from .geometry import BOUNDARY_MODES
from .model import OneSac
from .pipeline import (
    PipelineConfig,
    dump_config,
    load_config,
    metrics_csv_rows,
    run_pair,
    run_pipeline,
)
from .synth import SCENES, synth, write_scene

EXIT_OK = 0
EXIT_IO = 2
EXIT_PARSE = 3
EXIT_DEGENERATE = 4

# blob parameter presets; "best" is the strongest configuration found
PRESETS = {
    "baseline": {"f": "omega", "f_prime": 1, "variant": "nnr", "fginn": "none",
                 "combiner": "first"},
    "best": {"f": 10, "f_mode": "union", "f_prime": 5, "variant": "nnr_plus",
             "fginn": "overlap", "fginn_threshold": 0.75, "combiner": "harmonic"},
}


def _parse_size(text: str) -> tuple[float, float]:
    try:
        w, h = text.lower().split("x")
        return float(w), float(h)
    except ValueError as exc:
        raise ParseError(f"size must look like 800x600, got {text!r}") from exc


def _infer_size(keypoints) -> tuple[float, float]:
    w = max((k.x for k in keypoints), default=1.0)
    h = max((k.y for k in keypoints), default=1.0)
    return max(float(w) + 1.0, 1.0), max(float(h) + 1.0, 1.0)


def _context(args) -> PairContext:
    kps1 = ctxio.read_keypoints_csv(args.keypoints1)
    kps2 = ctxio.read_keypoints_csv(args.keypoints2)
    w1, h1 = _parse_size(args.size1) if args.size1 else _infer_size(kps1)
    w2, h2 = _parse_size(args.size2) if args.size2 else _infer_size(kps2)
    return PairContext(kps1, kps2, w1, h1, w2, h2)


def _load_section(args, section: str) -> dict:
    """Stage settings from --config (full pipeline schema or a flat section)."""
    if not getattr(args, "config", None):
        return {}
    doc = ctxio.read_json(args.config)
    return doc.get(section, doc if section == "blob" and "pairs" not in doc else {})


def cmd_synth(args) -> int:
    scene = synth(scene=args.scene, n_inliers=args.inliers, n_outliers=args.outliers,
                  noise_px=args.noise_px, seed=args.seed,
                  width=args.width, height=args.height)
    write_scene(scene, args.out)
    print(f"wrote scene ({scene.n_matches} planted matches) to {args.out}")
    return EXIT_OK


def cmd_match(args) -> int:
    params = dict(PRESETS[args.preset]) if args.preset else {}
    params.update(_load_section(args, "blob"))
    matcher = BlobMatcher(**params)
    dist = ctxio.read_distances(args.distances)
    ctx = None
    if args.keypoints1 and args.keypoints2:
        ctx = _context(args)
    matches = matcher.match(dist, ctx)
    ctxio.write_matches_csv(args.out, matches)
    print(f"{len(matches)} matches -> {args.out}")
    return EXIT_OK


def cmd_filter(args) -> int:
    matches = ctxio.read_matches_csv(args.matches)
    if args.kind == "threshold":
        kept = MatchSet(m for m in matches if m.score <= args.threshold)
    elif args.kind == "none":
        kept = matches
    else:
        ctx = _context(args)
        stage = args.stage or ("dtm1_only" if args.kind == "dtm1" else "full")
        filt = DtmFilter(stage=stage, boundary_mode=args.boundary_mode)
        kept = filt.filter_matches(matches, ctx)
    ctxio.write_matches_csv(args.out, kept)
    print(f"{len(matches)} -> {len(kept)} matches -> {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    matches = ctxio.read_matches_csv(args.matches)
    ctx = _context(args)
    sac = OneSac(kind=args.kind, inlier_threshold=args.threshold)
    sac.fit(matches, ctx)
    ctxio.write_matches_csv(args.out, sac.inliers_)
    if args.model_out:
        payload = {"failed": sac.failed_}
        if sac.model_ is not None:
            payload[args.kind] = [float(v) for v in sac.model_.matrix.ravel()]
        ctxio.write_json(args.model_out, payload)
    if sac.failed_:
        print("model fit failed; empty output")
    else:
        print(f"{len(matches)} -> {len(sac.inliers_)} matches -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    matches = ctxio.read_matches_csv(args.matches)
    ctx = _context(args)
    gt = ctxio.read_ground_truth_json(args.ground_truth)
    universe = ctxio.read_matches_csv(args.universe) if args.universe else None
    gt_universe = ctxio.read_matches_csv(args.gt_universe) if args.gt_universe else None
    report = score_pair(matches, gt, ctx, args.method, universe=universe,
                        gt_universe=gt_universe)
    payload = report.to_dict()
    payload["average_precision"] = average_precision(report.labels)
    ctxio.write_json(args.out, payload)
    print(json.dumps({k: payload[k] for k in
                      ("precision", "recall", "correct_count", "output_count", "failed")}))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    if args.workers:
        cfg.workers = args.workers
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.boundary_mode:
        cfg.filter = {**cfg.filter, "boundary_mode": args.boundary_mode}
    if args.stage:
        stage_kind = {"full": "dtm", "dtm1_only": "dtm1"}[args.stage]
        cfg.filter = {**cfg.filter, "kind": stage_kind}
    aggregate = run_pipeline(cfg)
    if args.csv:
        out_dir = Path(cfg.output_dir)
        per_pair = [ctxio.read_json(out_dir / f"{p.name}_metrics.json") for p in cfg.pairs]
        ctxio.write_metrics_csv(out_dir / "metrics.csv", metrics_csv_rows(per_pair))
    print(json.dumps(aggregate, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxmatch",
                                     description="context-based correspondence filtering")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--scene", choices=SCENES, default="planar")
    p.add_argument("--inliers", type=int, default=100)
    p.add_argument("--outliers", type=int, default=100)
    p.add_argument("--noise-px", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=float, default=800.0)
    p.add_argument("--height", type=float, default=600.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("match", help="blob matching on a distance matrix")
    p.add_argument("--distances", required=True)
    p.add_argument("--keypoints1")
    p.add_argument("--keypoints2")
    p.add_argument("--size1", help="image 1 canvas, e.g. 800x600")
    p.add_argument("--size2")
    p.add_argument("--config", help="JSON with blob parameters")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("filter", help="spatial or threshold filtering of matches")
    p.add_argument("--matches", required=True)
    p.add_argument("--kind", choices=("dtm", "dtm1", "threshold", "none"), default="dtm")
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--keypoints1")
    p.add_argument("--keypoints2")
    p.add_argument("--size1")
    p.add_argument("--size2")
    p.add_argument("--stage", choices=("full", "dtm1_only"))
    p.add_argument("--boundary-mode", choices=BOUNDARY_MODES, default="alpha")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("fit", help="1SAC model fit and inlier filtering")
    p.add_argument("--matches", required=True)
    p.add_argument("--keypoints1", required=True)
    p.add_argument("--keypoints2", required=True)
    p.add_argument("--size1")
    p.add_argument("--size2")
    p.add_argument("--kind", choices=("homography", "fundamental"), default="homography")
    p.add_argument("--threshold", type=float, default=15.0)
    p.add_argument("--out", required=True)
    p.add_argument("--model-out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score matches against a ground truth")
    p.add_argument("--matches", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--keypoints1", required=True)
    p.add_argument("--keypoints2", required=True)
    p.add_argument("--size1")
    p.add_argument("--size2")
    p.add_argument("--method", choices=("A", "C", "D", "depth"), default="D")
    p.add_argument("--universe", help="matches CSV giving the recall denominator")
    p.add_argument("--gt-universe", help="matches CSV giving the starred-recall denominator")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run the full chain over a batch")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--boundary-mode", choices=BOUNDARY_MODES)
    p.add_argument("--stage", choices=("full", "dtm1_only"))
    p.add_argument("--csv", action="store_true", help="also write the metrics table as CSV")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateGeometryError as exc:
        print(f"degenerate geometry: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
