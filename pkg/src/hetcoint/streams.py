"""Deterministic stream splitting for reproducible parallel simulation.

Every random draw in the package is addressed by a root seed plus an
integer path (replication index, bootstrap index, ...).  Paths are mapped
to independent generators through ``numpy.random.SeedSequence`` spawn
keys, a counter-based splitting scheme: the stream obtained for a given
(root, path) pair never depends on execution order, process layout or
worker count.
"""

from __future__ import annotations

import numpy as np


def spawn_seed(root: int, *path: int) -> int:
    """Return a 64-bit integer seed for the substream addressed by ``path``."""
    ss = np.random.SeedSequence(root, spawn_key=path)
    return int(ss.generate_state(1, np.uint64)[0])


def substream(root: int, *path: int) -> np.random.Generator:
    """Return an independent generator for the substream addressed by ``path``."""
    return np.random.default_rng(np.random.SeedSequence(root, spawn_key=path))
