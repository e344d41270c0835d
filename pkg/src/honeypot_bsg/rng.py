"""Counter-based random streams split off one 64-bit seed.

Stream ids are fixed: network generation 0, honeypot placement 1, tie-breaks 2.
Each stream is a Philox generator keyed by ``(seed, stream_id)``, so streams
never overlap and do not depend on how much another stream was consumed.
"""

import numpy as np

NETWORK_STREAM = 0
PLACEMENT_STREAM = 1
TIEBREAK_STREAM = 2


def stream(seed: int, stream_id: int) -> np.random.Generator:
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream_id)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
