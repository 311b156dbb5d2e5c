"""
Counter-based random streams.

Every random draw in fieldinfer comes from a Philox generator keyed by a
master seed and a tuple of integers (purpose, index, ...). A draw depends
only on its key, never on the order in which work units are scheduled.
"""
import numpy as np

from apps.grid.exceptions import ConfigError

# Purpose tags keep streams for different uses disjoint.
REPLICATE = 1
NOISE = 2
NOISE_ROW = 3
SIMULATION = 4
PILOT = 5
BLOCK = 6
BLOCK_REPLICATE = 7
BOOTSTRAP_SEED = 8


def stream(seed, *key):
    """
    Build the generator for one keyed stream.

    Args:
        seed: master seed, non-negative 64-bit integer
        *key: non-negative integers identifying the stream

    Returns:
        numpy.random.Generator backed by Philox
    """
    seed = int(seed)
    if seed < 0 or seed >= 2 ** 64:
        raise ConfigError(f"seed must be a non-negative 64-bit integer, got {seed}")
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed, *key):
    """Draw a child master seed from a keyed stream."""
    return int(stream(seed, *key).integers(0, 2 ** 63))
