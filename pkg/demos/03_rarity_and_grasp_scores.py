"""Score shapes two ways: latent-space rarity and physical graspness.

Rarity compares each shape's local latent density against its neighbors'
(1.0 = typical, higher = rarer).  Graspness samples antipodal parallel-jaw
grasps on the actual mesh and reports the fraction whose perturbed wrench
quality clears the success threshold.

Run:  python3 demos/03_rarity_and_grasp_scores.py
"""

import numpy as np

from graspforge.corpus import build_toy_corpus
from graspforge.grasping import GraspConfig, ferrari_canny, score_grasps
from graspforge.rarity import RarityConfig, rarity_scores
from graspforge.scoring import build_score_table

corpus = build_toy_corpus(30, seed=3)
ids = [sid for sid, _, _ in corpus]
kinds = {sid: kind for sid, kind, _ in corpus}
meshes = [mesh for _, _, mesh in corpus]

# stand-in latents: cheap geometric descriptors (the real pipeline encodes
# voxel grids through the autoencoder — see demo 02)
latents = []
for mesh in meshes:
    lo, hi = mesh.bounds()
    ext = hi - lo
    latents.append([*ext, mesh.volume() / ext.prod(), mesh.surface_area()])
latents = np.asarray(latents)

grasp_cfg = GraspConfig(samples_per_object=20, robustness_trials=6)
table = build_score_table(ids, latents, meshes, RarityConfig(k=4), grasp_cfg,
                          master_seed=11)

print(f"{'shape':10s} {'kind':9s} {'rarity':>7s} {'graspness':>9s} {'grasps':>6s}")
for sid in ids:
    row = table[sid]
    print(f"{sid:10s} {kinds[sid]:9s} {row['rarity']:7.3f} "
          f"{row['graspness']:9.2f} {row['n_grasps']:6d}")

rarest = max(ids, key=lambda s: table[s]["rarity"])
hardest = min(ids, key=lambda s: table[s]["graspness"])
print(f"\nrarest shape:  {rarest} ({kinds[rarest]}), "
      f"score {table[rarest]['rarity']:.2f}")
print(f"hardest grasp: {hardest} ({kinds[hardest]}), "
      f"graspness {table[hardest]['graspness']:.2f}")

# peek at one grasp's wrench quality
mesh = meshes[0]
cands = score_grasps(mesh, grasp_cfg, seed=2)
if cands:
    c = cands[0]
    print(f"\nexample grasp on {ids[0]}: width {100 * c.width:.1f} cm, "
          f"quality {c.quality:.4f}, robust {c.robust_quality:.4f} "
          f"(success cutoff {grasp_cfg.quality_threshold})")
