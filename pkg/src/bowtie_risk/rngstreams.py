"""Deterministic random-stream derivation shared by every sampling subsystem.

Each drawn unit (a sampled scene, a simulated episode, a marginalization
chunk) gets its own PCG64 generator keyed by ``(seed, subsystem_tag, index)``
through ``numpy.random.SeedSequence``. Consequences of this scheme:

* byte-identical reproducibility for a fixed seed, independent of platform;
* prefix stability: enlarging a batch never changes the units already drawn;
* safe parallel partitioning: workers can claim disjoint index ranges
  without sharing generator state.

The subsystem tags keep streams from colliding when one seed is reused
across subsystems in the same run.
"""

from __future__ import annotations

import numpy as np

SCENE_STREAM = 1
EPISODE_STREAM = 2
MARGINAL_STREAM = 3


def substream(seed: int, tag: int, index: int) -> np.random.Generator:
    """Generator for one drawn unit; same arguments, same byte stream."""
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, tag, index))))
