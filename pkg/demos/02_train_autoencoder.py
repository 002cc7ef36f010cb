"""Train the voxel autoencoder on a small corpus and watch it reconstruct.

Uses a reduced 16^3 model so the demo finishes in about a minute; the
library defaults (32^3, deeper channels) are what the test suite trains.

Run:  python3 demos/02_train_autoencoder.py
"""

import numpy as np

from graspforge.corpus import build_toy_corpus
from graspforge.geometry import voxelize
from graspforge.model import ModelConfig, TrainPhases, decode, encode, train

config = ModelConfig(grid_resolution=16, latent_dim=16, channels=(8, 16))
phases = TrainPhases(phase1_epochs=12, phase2_epochs=0, batch_size=16)

print("building 48 toy shapes and voxelizing at 16^3 ...")
corpus = build_toy_corpus(48, seed=7)
grids = [voxelize(mesh, config.grid_resolution) for _, _, mesh in corpus]

print("training phase 1 (reconstruction only) ...")
params, report = train(grids, config, phases, seed=1)
for entry in report.epochs:
    print(f"  epoch {entry['epoch']:2d}  bce {entry['ae_loss']:.4f}  "
          f"iou {entry['iou']:.3f}")

# round-trip one shape through the bottleneck
sid, kind, _ = corpus[0]
z = encode(params, grids[0], config)
recon = decode(params, z, config)
binary = recon.occupancy > 0.5
truth = grids[0].occupancy > 0.5
iou = (binary & truth).sum() / (binary | truth).sum()
print(f"\n{sid} ({kind}): latent 16-vector -> reconstruction IoU {iou:.3f}")
print("latent head:", np.round(z[:6], 3))
