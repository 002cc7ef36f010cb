"""End-to-end miniature of the augmentation pipeline, in-process.

Train a small model with its critic, pick high-scoring shapes, pair latent
neighbors, decode interpolants, and assemble an augmented manifest.  The
CLI wraps exactly this flow (see README); here every intermediate is a
Python object you can poke at.

Run:  python3 demos/04_generate_new_shapes.py
"""

import tempfile
from pathlib import Path

import numpy as np

from graspforge.augment import (
    AugmentConfig,
    augment_dataset,
    form_generation_pairs,
    generate_shapes,
    select_high_scoring,
)
from graspforge.corpus import build_toy_corpus, write_corpus
from graspforge.geometry import voxelize
from graspforge.model import ModelConfig, TrainPhases, encode_batch, train
from graspforge.rarity import RarityConfig, rarity_scores

config = ModelConfig(grid_resolution=16, latent_dim=16, channels=(8, 16))

print("corpus + voxelization ...")
corpus = build_toy_corpus(40, seed=9)
ids = [sid for sid, _, _ in corpus]
grids = [voxelize(mesh, config.grid_resolution) for _, _, mesh in corpus]
grids_by_id = dict(zip(ids, grids))

print("training autoencoder + critic ...")
params, report = train(
    grids, config,
    TrainPhases(phase1_epochs=10, phase2_epochs=4, batch_size=16),
    seed=5,
)
print(f"  final IoU {report.epochs[-1]['iou']:.3f}")

latents = encode_batch(params, grids, config)
latents_by_id = {sid: latents[i] for i, sid in enumerate(ids)}
rarity = dict(zip(ids, rarity_scores(latents, RarityConfig(k=4))))

selected = select_high_scoring(rarity, percentile=60.0)
print(f"\nselected {len(selected)} shapes above the 60th rarity percentile")

pairs = form_generation_pairs(selected, latents_by_id, neighbor_start=1,
                              neighbor_span=1, source_metric="rarity")
print(f"formed {len(pairs)} generation pairs (ranks 1-2 within the selection)")

acfg = AugmentConfig(alphas=(0.25, 0.5), rejection_outlier_pct=25.0)
generated, rejected = generate_shapes(pairs, acfg.alphas, params, config,
                                      grids_by_id, acfg)
print(f"decoded {len(generated)} shapes, rejected {len(rejected)} as fragmented")
for g in generated[:5]:
    print(f"  {g.shape_id}: parents {g.pair.shape_a}+{g.pair.shape_b} "
          f"alpha {g.alpha}, outliers {g.outlier_percentage:.1f}%")

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    original = write_corpus(corpus, out / "orig", seed=9)
    ratio = 0.5
    manifest = augment_dataset(original, generated, ratio, seed=5, out_dir=out / "aug")
    print(f"\naugmented manifest: {manifest['n_original']} originals + "
          f"{manifest['n_generated']} generated (ratio {ratio})")
