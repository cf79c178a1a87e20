"""Counter-based deterministic random streams.

Every stochastic routine draws from a Philox stream keyed by
``(seed, stream_id)``.  Streams are independent of each other and of the
order in which they are consumed, so stratified sampling gives identical
results for any worker count.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Return the Philox generator for substream ``stream_id`` of ``seed``."""
    key = (int(seed) & _MASK64) | ((int(stream_id) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))
