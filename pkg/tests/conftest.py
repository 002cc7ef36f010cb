"""Session fixtures: the desk-scale corpus and trained checkpoints.

Training the 200-shape models takes several minutes; every test that needs
a trained model shares these fixtures.  Both models share the same seed and
the same phase-1 weights, which the trend acceptance criteria require.
"""

import time

import numpy as np
import pytest

CORPUS_SEED = 77
TRAIN_SEED = 42
RESOLUTION = 32
PHASE1_EPOCHS = 20
PHASE2_EPOCHS = 12


@pytest.fixture(scope="session")
def toy_corpus_200():
    from graspforge.corpus import build_toy_corpus

    return build_toy_corpus(200, seed=CORPUS_SEED)


@pytest.fixture(scope="session")
def toy_grids_200(toy_corpus_200):
    from graspforge.geometry import voxelize

    return [voxelize(mesh, RESOLUTION) for _, _, mesh in toy_corpus_200]


@pytest.fixture(scope="session")
def desk_config():
    from graspforge.model import ModelConfig

    return ModelConfig()


@pytest.fixture(scope="session")
def trained_ae(toy_grids_200, desk_config):
    """Phase-1-only model; returns (params, report, wall_seconds)."""
    from graspforge.model import TrainPhases, train

    phases = TrainPhases(phase1_epochs=PHASE1_EPOCHS, phase2_epochs=0)
    start = time.monotonic()
    params, report = train(toy_grids_200, desk_config, phases, seed=TRAIN_SEED)
    elapsed = time.monotonic() - start
    return params, report, elapsed


@pytest.fixture(scope="session")
def trained_ae_critic(toy_grids_200, desk_config, trained_ae):
    """Phase-2 continuation from the shared phase-1 weights."""
    from graspforge.model import TrainPhases, train

    ae_params, _, _ = trained_ae
    phases = TrainPhases(phase1_epochs=0, phase2_epochs=PHASE2_EPOCHS)
    params, report = train(
        toy_grids_200, desk_config, phases, seed=TRAIN_SEED, init=ae_params
    )
    return params, report


def mean_outlier_percentage(params, config, grids, pair_idx, alpha):
    """Mean completeness outlier share of decoded latent interpolants.

    Empty decodes are skipped (they are not shapes; the generation pipeline
    rejects them before they reach the completeness metric).
    """
    from graspforge.geometry import completeness
    from graspforge.model import decode_batch, encode_batch

    za = encode_batch(params, [grids[i] for i in pair_idx[:, 0]], config)
    zb = encode_batch(params, [grids[i] for i in pair_idx[:, 1]], config)
    z_mix = alpha * za + (1.0 - alpha) * zb
    out = []
    for start in range(0, len(z_mix), 16):
        for grid in decode_batch(params, z_mix[start : start + 16], config):
            binary = grid.thresholded(0.5)
            if binary.occupied_count() == 0:
                continue
            out.append(completeness(binary).outlier_percentage)
    return float(np.mean(out)) if out else 0.0
