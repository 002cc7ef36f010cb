"""Command-line pipeline: corpus -> train -> score -> generate -> evaluate.

Every command reads an optional shared JSON config (``--config``), embeds
the resolved config and seed in its outputs, and exits 0 on success, 2 on
usage errors, 3 on data errors, 4 on config errors.  Failures print a
machine-readable JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .augment import augment_dataset, form_generation_pairs, generate_shapes, select_high_scoring
from .config import PipelineConfig
from .corpus import build_toy_corpus, import_corpus, load_manifest, write_corpus
from .errors import ConfigError, DataError, GraspForgeError
from .geometry import load_mesh, pca_project, voxelize
from .model import TrainPhases, encode_batch, decode_batch, load_model, save_model, train
from .rarity import rarity_scores
from .reports import file_digest, histogram, svg_histogram, svg_scatter, write_report
from .scoring import build_score_table, load_score_table, save_score_table

__all__ = ["main"]


def _fail(exc, code):
    payload = {"error": {"type": type(exc).__name__, "message": str(exc), "code": code}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _resolve_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _load_corpus(manifest_path):
    manifest = load_manifest(manifest_path)
    base = Path(manifest_path).parent
    ids, meshes, extents = [], [], []
    for entry in manifest["entries"]:
        mesh = load_mesh(base / entry["path"])
        ids.append(entry["id"])
        meshes.append(mesh)
        extents.append(entry.get("physical_extent"))
    return manifest, ids, meshes


def _voxelize_corpus(meshes, resolution):
    grids, warnings = [], []
    for mesh in meshes:
        grid = voxelize(mesh, resolution)
        grids.append(grid)
        warnings.extend(grid.warnings)
    return grids, warnings


def _bruteforce_rarity(latents, k, floor):
    """Independent brute-force scoring path behind the hidden --oracle flag."""
    n = len(latents)
    dens = np.empty(n)
    neighbor_idx = []
    for i in range(n):
        cand = []
        for j in range(n):
            if j == i:
                continue
            cand.append((float(np.linalg.norm(latents[i] - latents[j])), j))
        cand.sort(key=lambda t: (t[0], t[1]))
        nearest = cand[:k]
        neighbor_idx.append([j for _, j in nearest])
        dens[i] = 1.0 / max(sum(d for d, _ in nearest) / k, floor)
    return np.array(
        [sum(dens[j] / dens[i] for j in neighbor_idx[i]) / k for i in range(n)]
    )


# --- commands ----------------------------------------------------------------------


def cmd_corpus(args) -> int:
    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "toy":
        entries = build_toy_corpus(args.count, cfg.seed)
        manifest = write_corpus(entries, out, cfg.seed, kind="toy")
    else:
        if not args.source:
            raise ConfigError("--source DIR is required for kind 'import'")
        manifest = import_corpus(args.source, out, cfg.seed)
    outputs = {"manifest.json": file_digest(out / "manifest.json")}
    for entry in manifest["entries"]:
        outputs[entry["path"]] = file_digest(out / entry["path"])
    kinds = {}
    for entry in manifest["entries"]:
        kinds[entry["shape_kind"]] = kinds.get(entry["shape_kind"], 0) + 1
    write_report(
        out, "corpus", cfg.to_dict(), cfg.seed, {}, outputs,
        {"count": manifest["count"], "kinds": kinds},
    )
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest, ids, meshes = _load_corpus(args.corpus)
    t0 = time.monotonic()
    grids, warnings = _voxelize_corpus(meshes, cfg.model.grid_resolution)
    init = None
    phases = cfg.train
    if args.mode == "ae":
        phases = replace(phases, phase2_epochs=0)
    elif args.init:
        init_params, init_cfg, _ = load_model(args.init)
        if init_cfg != cfg.model:
            raise ConfigError(
                "checkpoint config does not match the requested model config "
                f"({init_cfg} vs {cfg.model})"
            )
        init = init_params
        phases = replace(phases, phase1_epochs=0)
    params, report = train(grids, cfg.model, phases, cfg.seed, init=init)
    ckpt = out / "checkpoint.gfck"
    save_model(
        params, cfg.model, cfg.seed, ckpt,
        extra={"mode": args.mode, "epochs": report.phases,
               "init": str(args.init) if args.init else None},
    )
    elapsed = time.monotonic() - t0
    outputs = {
        "checkpoint.gfck": file_digest(ckpt),
        "checkpoint.json": file_digest(out / "checkpoint.json"),
    }
    summary = {
        "mode": args.mode,
        "epochs": report.epochs,
        "learning_rates": report.phases["learning_rates"],
        "final_iou": report.epochs[-1].get("iou") if report.epochs else None,
    }
    write_report(
        out, "train", cfg.to_dict(), cfg.seed,
        {str(args.corpus): file_digest(args.corpus)}, outputs, summary, warnings,
    )
    print(f"train: {args.mode} finished in {elapsed:.1f}s", file=sys.stderr)
    return 0


def cmd_score(args) -> int:
    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, model_cfg, _ = load_model(args.checkpoint)
    manifest, ids, meshes = _load_corpus(args.corpus)
    grids, warnings = _voxelize_corpus(meshes, model_cfg.grid_resolution)
    latents = encode_batch(params, grids, model_cfg)
    table = build_score_table(
        ids, latents, meshes, cfg.rarity, cfg.grasp, cfg.seed, jobs=args.jobs
    )
    if args.oracle:
        oracle = _bruteforce_rarity(latents, cfg.rarity.k, cfg.rarity.distance_floor)
        for i, sid in enumerate(ids):
            table[sid]["rarity"] = float(oracle[i])
    scores_path = out / "scores.json"
    save_score_table(table, scores_path)

    rarity_vals = [table[i]["rarity"] for i in ids]
    grasp_vals = [table[i]["graspness"] for i in ids]
    rarity_hist = histogram(rarity_vals, bins=10)
    grasp_hist = histogram(grasp_vals, bins=10, value_range=(0.0, 1.0))
    scatter = pca_project(latents)
    svg_histogram(rarity_hist, out / "rarity_hist.svg", "rarity scores")
    svg_histogram(grasp_hist, out / "graspness_hist.svg", "graspness scores")
    svg_scatter(scatter, grasp_vals, out / "latent_scatter.svg", "latents colored by graspness")
    outputs = {
        "scores.json": file_digest(scores_path),
        "rarity_hist.svg": file_digest(out / "rarity_hist.svg"),
        "graspness_hist.svg": file_digest(out / "graspness_hist.svg"),
        "latent_scatter.svg": file_digest(out / "latent_scatter.svg"),
    }
    summary = {
        "rarity_histogram": rarity_hist,
        "graspness_histogram": grasp_hist,
        "pca_scatter": {
            "points": [[float(a), float(b)] for a, b in scatter],
            "color_by": "graspness",
            "colors": [float(v) for v in grasp_vals],
        },
        "oracle_mode": bool(args.oracle),
    }
    write_report(
        out, "score", cfg.to_dict(), cfg.seed,
        {str(args.corpus): file_digest(args.corpus),
         str(args.checkpoint): file_digest(args.checkpoint)},
        outputs, summary, warnings,
    )
    return 0


def cmd_generate(args) -> int:
    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, model_cfg, _ = load_model(args.checkpoint)
    manifest, ids, meshes = _load_corpus(args.corpus)
    table = load_score_table(args.scores)
    missing = [i for i in ids if i not in table]
    if missing:
        raise DataError(f"score table missing entries for {missing[:5]}")
    grids, warnings = _voxelize_corpus(meshes, model_cfg.grid_resolution)
    grids_by_id = dict(zip(ids, grids))
    latents = encode_batch(params, grids, model_cfg)
    latents_by_id = {i: latents[n] for n, i in enumerate(ids)}

    acfg = cfg.augment if args.ratio is None else replace(cfg.augment, ratio=args.ratio)
    digest = file_digest(args.checkpoint)
    generated = []
    rejections = []
    selections = {}
    for metric, high in (
        ("rarity", acfg.select_high_rarity),
        ("graspness", acfg.select_high_graspness),
    ):
        scores = {i: table[i][metric] for i in ids}
        selected = select_high_scoring(scores, acfg.percentile, high=high)
        selections[metric] = sorted(selected)
        pairs = form_generation_pairs(
            selected, latents_by_id, acfg.neighbor_start, acfg.neighbor_span, metric
        )
        accepted, rejected = generate_shapes(
            pairs, acfg.alphas, params, model_cfg, grids_by_id, acfg, digest
        )
        generated.extend(accepted)
        rejections.extend(rejected)

    # identical latent mixes can arise from both metrics; keep one copy
    unique = {}
    for g in generated:
        unique.setdefault(g.shape_id, g)
    generated = list(unique.values())

    aug_manifest = augment_dataset(
        manifest, generated, acfg.ratio, cfg.seed, out,
        config_snapshot=cfg.to_dict(), scores=table,
    )
    with open(out / "rejections.json", "w", encoding="utf-8") as fh:
        json.dump(rejections, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs = {
        "manifest.json": file_digest(out / "manifest.json"),
        "rejections.json": file_digest(out / "rejections.json"),
    }
    for entry in aug_manifest["entries"]:
        if entry["provenance"] == "generated":
            outputs[entry["path"]] = file_digest(out / entry["path"])
    summary = {
        "selected": {k: len(v) for k, v in selections.items()},
        "generated_total": len(generated),
        "appended": aug_manifest["n_generated"],
        "rejected": len(rejections),
        "ratio": acfg.ratio,
    }
    write_report(
        out, "generate", cfg.to_dict(), cfg.seed,
        {str(args.corpus): file_digest(args.corpus),
         str(args.checkpoint): file_digest(args.checkpoint),
         str(args.scores): file_digest(args.scores)},
        outputs, summary, warnings,
    )
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    alphas = [float(a) for a in args.alphas.split(",") if a.strip() != ""]
    if not alphas:
        raise ConfigError("at least one interpolation weight required")
    if any(a < 0.0 or a > 0.5 for a in alphas):
        raise ConfigError("interpolation weights must lie in [0, 0.5]")
    params_a, cfg_a, _ = load_model(args.checkpoint_a)
    params_b, cfg_b, _ = load_model(args.checkpoint_b)
    if cfg_a.grid_resolution != cfg_b.grid_resolution:
        raise ConfigError(
            f"checkpoints disagree on resolution: {cfg_a.grid_resolution} vs "
            f"{cfg_b.grid_resolution}"
        )
    manifest, ids, meshes = _load_corpus(args.corpus)
    grids, warnings = _voxelize_corpus(meshes, cfg_a.grid_resolution)
    rng = np.random.default_rng(cfg.seed)
    n = len(grids)
    if n < 2:
        raise DataError("evaluation needs at least two corpus shapes")
    pair_idx = np.stack(
        [rng.choice(n, size=2, replace=False) for _ in range(args.pairs)]
    )

    from .geometry import completeness

    def mean_outlier(params, model_cfg, alpha):
        """Mean outlier share over non-empty decodes, plus the empty count.

        Empty decodes are not shapes (the generation pipeline drops them),
        so they are excluded from the mean and reported separately.
        """
        za = encode_batch(params, [grids[i] for i in pair_idx[:, 0]], model_cfg)
        zb = encode_batch(params, [grids[i] for i in pair_idx[:, 1]], model_cfg)
        z_mix = alpha * za + (1.0 - alpha) * zb
        pct = []
        empty = 0
        for start in range(0, len(z_mix), 16):
            for grid in decode_batch(params, z_mix[start : start + 16], model_cfg):
                binary = grid.thresholded(0.5)
                if binary.occupied_count() == 0:
                    empty += 1
                    continue
                pct.append(completeness(binary).outlier_percentage)
        mean = float(np.mean(pct)) if pct else None
        return mean, empty

    rows = []
    for alpha in alphas:
        mean_a, empty_a = mean_outlier(params_a, cfg_a, alpha)
        mean_b, empty_b = mean_outlier(params_b, cfg_b, alpha)
        rows.append(
            {
                "alpha": alpha,
                "model_a": mean_a,
                "model_b": mean_b,
                "empty_a": empty_a,
                "empty_b": empty_b,
            }
        )
    comparison = {
        "checkpoint_a": str(args.checkpoint_a),
        "checkpoint_b": str(args.checkpoint_b),
        "pairs": int(args.pairs),
        "rows": rows,
    }
    with open(out / "comparison.json", "w", encoding="utf-8") as fh:
        json.dump(comparison, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_report(
        out, "evaluate", cfg.to_dict(), cfg.seed,
        {str(args.corpus): file_digest(args.corpus),
         str(args.checkpoint_a): file_digest(args.checkpoint_a),
         str(args.checkpoint_b): file_digest(args.checkpoint_b)},
        {"comparison.json": file_digest(out / "comparison.json")},
        {"rows": rows}, warnings,
    )
    return 0


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graspforge",
        description="Shape autoencoding, grasp-aware scoring and latent-space "
                    "dataset augmentation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, jobs=False, oracle=False):
        p.add_argument("--config", type=Path, default=None, help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        if oracle:
            p.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("corpus", help="build a toy corpus or import OBJ meshes")
    p.add_argument("--kind", choices=("toy", "import"), default="toy")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--source", type=Path, default=None, help="OBJ directory for import")
    common(p)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("train", help="train the autoencoder (and critic)")
    p.add_argument("--corpus", type=Path, required=True, help="corpus manifest.json")
    p.add_argument("--mode", choices=("ae", "ae-critic"), default="ae-critic")
    p.add_argument("--init", type=Path, default=None,
                   help="phase-1 checkpoint to continue from (ae-critic mode)")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="rarity and graspness for every corpus shape")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    common(p, jobs=True, oracle=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("generate", help="generate shapes and assemble the augmented set")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--scores", type=Path, required=True)
    p.add_argument("--ratio", type=float, default=None, help="override augment ratio")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="compare interpolant completeness of two models")
    p.add_argument("--checkpoint-a", type=Path, required=True)
    p.add_argument("--checkpoint-b", type=Path, required=True)
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--alphas", type=str, default="0.1,0.25,0.5",
                   help="comma-separated weights in [0, 0.5]")
    p.add_argument("--pairs", type=int, default=32)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc, 4)
    except GraspForgeError as exc:
        return _fail(exc, 3)
    except FileNotFoundError as exc:
        return _fail(exc, 3)


if __name__ == "__main__":
    sys.exit(main())
