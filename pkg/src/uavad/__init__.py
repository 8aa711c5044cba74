"""Grid-based scene representation and GPS-conditioned autoencoder anomaly
detection for bird-view imagery.

Modules:
  grid      binary occupancy tensors, rasterization, scene serialization
  nn        layers with hand-written backward passes, Adam, seeded RNG
  adnet     the four model variants, loss, training loop, checkpoints
  world     synthetic waypoint world, dataset generation, anomaly injection
  detect    reconstruction-comparison anomaly detection
  evaluate  precision/recall/F1, task accuracy, four-variant benchmark
  cli       command-line pipeline (uavad generate/train/inject/detect/eval)
"""

__version__ = "0.1.0"

from . import adnet, detect, evaluate, grid, nn, world  # noqa: F401
