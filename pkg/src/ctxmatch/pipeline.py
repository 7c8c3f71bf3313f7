"""Batch orchestration: match -> spatial filter -> model fit -> evaluation.

A pipeline configuration lists image pairs (keypoint, distance and
ground-truth files plus canvas sizes) and the stage settings. Pairs are
processed independently (optionally by a thread pool) and results are
aggregated in input order, so outputs are deterministic for any worker
count. Every stage output is dumped as a match CSV and can be re-ingested
by the stage subcommands.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as ctxio
from .blob import BlobMatcher
from .core import Match, MatchSet, PairContext
from .dtm import DtmFilter
from .errors import ParseError
from .evaluation import average_precision, mean_average_precision, score_pair
from .model import OneSac

FILTER_KINDS = ("none", "dtm1", "dtm", "threshold")
MODEL_KINDS = ("none", "1sac")


@dataclass(frozen=True)
class PairSpec:
    name: str
    keypoints1: str
    keypoints2: str
    distances: str
    ground_truth: str | None
    width1: float
    height1: float
    width2: float
    height2: float


@dataclass
class PipelineConfig:
    pairs: list[PairSpec]
    blob: dict = field(default_factory=dict)
    filter: dict = field(default_factory=lambda: {"kind": "none"})
    model: dict = field(default_factory=lambda: {"kind": "none"})
    eval: dict = field(default_factory=lambda: {"method": "D"})
    output_dir: str = "."
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.filter.get("kind", "none") not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.filter.get('kind')!r}")
        if self.model.get("kind", "none") not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model.get('kind')!r}")


def load_config(path) -> PipelineConfig:
    doc = ctxio.read_json(path)
    base = Path(path).parent
    try:
        pairs = []
        for entry in doc["pairs"]:
            pairs.append(PairSpec(
                name=entry.get("name", f"pair{len(pairs)}"),
                keypoints1=str(base / entry["keypoints1"]),
                keypoints2=str(base / entry["keypoints2"]),
                distances=str(base / entry["distances"]),
                ground_truth=str(base / entry["ground_truth"]) if "ground_truth" in entry else None,
                width1=float(entry["width1"]), height1=float(entry["height1"]),
                width2=float(entry["width2"]), height2=float(entry["height2"]),
            ))
        return PipelineConfig(
            pairs=pairs,
            blob=doc.get("blob", {}),
            filter=doc.get("filter", {"kind": "none"}),
            model=doc.get("model", {"kind": "none"}),
            eval=doc.get("eval", {"method": "D"}),
            output_dir=str(doc.get("output_dir", base)),
            workers=int(doc.get("workers", 1)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_pair_context(spec: PairSpec) -> PairContext:
    kps1 = ctxio.read_keypoints_csv(spec.keypoints1)
    kps2 = ctxio.read_keypoints_csv(spec.keypoints2)
    return PairContext(kps1, kps2, spec.width1, spec.height1, spec.width2, spec.height2)


def _all_pairs_matchset(n: int, m: int) -> MatchSet:
    return MatchSet(Match(i, j, 0.0) for i in range(n) for j in range(m))


def run_pair(spec: PairSpec, cfg: PipelineConfig, out_dir: Path) -> dict:
    ctx = load_pair_context(spec)
    dist = ctxio.read_distances(spec.distances)
    if dist.n != len(ctx.keypoints1) or dist.m != len(ctx.keypoints2):
        raise ParseError(
            f"{spec.name}: distance matrix is {dist.n}x{dist.m} but keypoint "
            f"files have {len(ctx.keypoints1)}/{len(ctx.keypoints2)} entries"
        )

    matcher = BlobMatcher(**cfg.blob)
    blob_out = matcher.match(dist, ctx)
    ctxio.write_matches_csv(out_dir / f"{spec.name}_blob.csv", blob_out)

    fcfg = dict(cfg.filter)
    kind = fcfg.pop("kind", "none")
    if kind == "none":
        filtered = blob_out
    elif kind == "threshold":
        t_r = float(fcfg.get("ratio_threshold", 0.8))
        filtered = MatchSet(m for m in blob_out if m.score <= t_r)
    else:
        stage = "dtm1_only" if kind == "dtm1" else "full"
        filt = DtmFilter(stage=stage,
                         boundary_mode=fcfg.get("boundary_mode", "alpha"),
                         per_iteration_boundaries=bool(fcfg.get("per_iteration_boundaries", False)))
        filtered = filt.filter_matches(blob_out, ctx)
    ctxio.write_matches_csv(out_dir / f"{spec.name}_filtered.csv", filtered)

    model_failed = False
    mcfg = dict(cfg.model)
    if mcfg.get("kind", "none") == "1sac":
        sac = OneSac(kind=mcfg.get("model", "homography"),
                     inlier_threshold=float(mcfg.get("inlier_threshold", 15.0)))
        sac.fit(filtered, ctx)
        final = sac.inliers_
        model_failed = sac.failed_
        if sac.model_ is not None:
            key = "homography" if sac.kind == "homography" else "fundamental"
            ctxio.write_json(out_dir / f"{spec.name}_model.json",
                             {key: [float(v) for v in sac.model_.matrix.ravel()]})
    else:
        final = filtered
    ctxio.write_matches_csv(out_dir / f"{spec.name}_final.csv", final)

    metrics: dict = {
        "pair": spec.name,
        "input_matches": len(blob_out),
        "filtered_matches": len(filtered),
        "output_matches": len(final),
        "model_failed": model_failed,
    }
    if spec.ground_truth is not None:
        gt = ctxio.read_ground_truth_json(spec.ground_truth)
        ecfg = dict(cfg.eval)
        method = ecfg.get("method", "D")
        gt_universe = None
        if ecfg.get("recall_star") == "all_pairs":
            gt_universe = _all_pairs_matchset(dist.n, dist.m)
        report = score_pair(final, gt, ctx, method, universe=blob_out, gt_universe=gt_universe)
        metrics.update(report.to_dict())
        metrics["average_precision"] = average_precision(report.labels)
    ctxio.write_json(out_dir / f"{spec.name}_metrics.json", metrics)
    return metrics


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every pair and write per-pair plus aggregate metrics.

    Returns the aggregate document. Deterministic for fixed inputs and seed
    regardless of the worker count.
    """
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.workers == 1 or len(cfg.pairs) <= 1:
        per_pair = [run_pair(spec, cfg, out_dir) for spec in cfg.pairs]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            per_pair = list(pool.map(lambda spec: run_pair(spec, cfg, out_dir), cfg.pairs))

    aggregate: dict = {"pairs": len(per_pair)}
    scored = [p for p in per_pair if "precision" in p]
    if scored:
        def mean_of(key):
            vals = [p[key] for p in scored if p.get(key) is not None]
            return float(np.mean(vals)) if vals else None

        aggregate.update({
            "precision": mean_of("precision"),
            "recall": mean_of("recall"),
            "recall_star": mean_of("recall_star"),
            "correct_matches": mean_of("correct_count"),
            "output_matches": mean_of("output_count"),
            "failures": int(sum(bool(p["failed"]) for p in scored)),
            "mAP": mean_average_precision([p["average_precision"] for p in scored]),
        })
    ctxio.write_json(out_dir / "aggregate_metrics.json", aggregate)
    return aggregate


def metrics_csv_rows(per_pair: list[dict]) -> list[dict]:
    rows = []
    for p in per_pair:
        rows.append({
            "pair": p.get("pair"),
            "precision": p.get("precision"),
            "recall": p.get("recall"),
            "recall_star": p.get("recall_star"),
            "correct_matches": p.get("correct_count"),
            "output_matches": p.get("output_count"),
            "failures": int(bool(p.get("failed"))) if "failed" in p else None,
            "time_s": p.get("time_s"),
        })
    return rows


def pipeline_config_from_scene_dir(scene_dir, **overrides) -> PipelineConfig:
    """Build a single-pair config from a directory written by the synth stage."""
    scene_dir = Path(scene_dir)
    manifest = ctxio.read_json(scene_dir / "manifest.json")
    files = manifest["files"]
    spec = PairSpec(
        name=manifest.get("name", "synth"),
        keypoints1=str(scene_dir / files["keypoints1"]),
        keypoints2=str(scene_dir / files["keypoints2"]),
        distances=str(scene_dir / files["distances"]),
        ground_truth=str(scene_dir / files["ground_truth"]),
        width1=manifest["width1"], height1=manifest["height1"],
        width2=manifest["width2"], height2=manifest["height2"],
    )
    defaults = dict(pairs=[spec], output_dir=str(scene_dir / "out"))
    defaults.update(overrides)
    return PipelineConfig(**defaults)


def dump_config(cfg: PipelineConfig, path) -> None:
    doc = {
        "pairs": [{
            "name": p.name,
            "keypoints1": p.keypoints1,
            "keypoints2": p.keypoints2,
            "distances": p.distances,
            **({"ground_truth": p.ground_truth} if p.ground_truth else {}),
            "width1": p.width1, "height1": p.height1,
            "width2": p.width2, "height2": p.height2,
        } for p in cfg.pairs],
        "blob": cfg.blob,
        "filter": cfg.filter,
        "model": cfg.model,
        "eval": cfg.eval,
        "output_dir": cfg.output_dir,
        "workers": cfg.workers,
        "seed": cfg.seed,
    }
    ctxio.atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
