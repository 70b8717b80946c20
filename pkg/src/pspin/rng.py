"""Random number policy.

All randomness flows through numpy's Philox counter-based bit generator,
seeded with 64-bit integers.  Gaussian draws use ``Generator.standard_normal``
(ziggurat method).  Streams for independent subtasks are derived from a master
seed plus a tuple of integer tags via ``SeedSequence(seed, spawn_key=tags)``,
so results are bit-reproducible on one platform regardless of scheduling
order or worker count.
"""

from __future__ import annotations

import numpy as np

# stream tags used when splitting a master seed into purpose-specific streams
STREAM_DISORDER = 0
STREAM_CHAIN = 1
STREAM_START = 2
STREAM_RESTART = 3
STREAM_SAMPLER = 4
STREAM_PILOT = 5


def make_rng(seed, *key):
    """Return a Generator for (seed, key...); same arguments, same stream."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *key):
    """Collapse (seed, key...) to a single 64-bit integer seed."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
