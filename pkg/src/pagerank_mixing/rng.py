"""Seeded random streams.

All randomness goes through :func:`make_rng`, which returns a
``numpy.random.Generator`` driven by the counter-based Philox-4x64-10 bit
generator.  The Philox key is the 64-bit value

    key = (seed XOR (stream * 0x9E3779B97F4A7C15)) mod 2**64

so stream 0 uses the seed itself and every replica, chunk or graph sample
gets an independent substream derived from one user seed.  Results depend
only on ``(seed, stream)``, never on thread scheduling.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def substream_key(seed: int, stream: int = 0) -> int:
    return (int(seed) ^ ((int(stream) * GOLDEN) & MASK64)) & MASK64


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return a Philox generator keyed by ``seed`` and ``stream``."""
    if seed < 0 or seed > MASK64:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=substream_key(seed, stream)))
