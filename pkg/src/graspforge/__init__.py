"""graspforge: voxel-shape autoencoding, grasp-aware scoring, and
latent-interpolation dataset augmentation.
"""

__version__ = "0.1.0"
