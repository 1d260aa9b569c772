"""Reproducible random streams for parallel ensembles.

Streams are counter-based (Philox) and keyed by ``(master_seed, path_index)``,
so every path of an ensemble gets an independent stream whose draws do not
depend on scheduling or worker count.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, path_index: int = 0) -> np.random.Generator:
    """Return the Generator for stream ``(master_seed, path_index)``.

    The same pair always yields the same sequence; distinct pairs are
    statistically independent.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.Philox(ss))
