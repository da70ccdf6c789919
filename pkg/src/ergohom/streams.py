"""Reproducible random streams keyed by (master seed, sample index)."""

import numpy as np

MASK64 = (1 << 64) - 1


def stream(master_seed: int, index: int = 0, *extra: int) -> np.random.Generator:
    """Philox generator for sample ``index`` under ``master_seed``.

    Streams depend only on the key, never on which thread draws them or in
    what order, so parallel runs replay bit-for-bit.
    """
    if not 0 <= master_seed <= MASK64:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master_seed}")
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(int(index), *map(int, extra)))
    return np.random.Generator(np.random.Philox(seq))
