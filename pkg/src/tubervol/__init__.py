"""tubervol: RGB-D shape completion and volume estimation for tubers.

The package pairs a latent-coded signed-distance decoder with a
convolutional RGB-D encoder. Meshes come out of a convex-hull
postprocessing chain that guarantees watertight volumes, and an
experiment harness reproduces the latent-size, size/cultivar/region,
and ablation analyses on real or synthetic data.
"""

__version__ = "0.1.0"
