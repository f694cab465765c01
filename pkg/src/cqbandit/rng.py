"""Counter-based random streams.

Every uniform used by a simulation is addressed by ``(seed, purpose, round)``.
The Philox key is ``(seed, purpose)`` and rounds are grouped into fixed-size
blocks whose counter occupies the third Philox word, so block ``b`` of a stream
never overlaps block ``b + 1``.  A draw therefore depends only on its address,
not on how many replications run together or in which order blocks are read.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

BLOCK = 4096


class Purpose(IntEnum):
    CONTEXT = 0
    COST = 1
    REWARD = 2
    COST_NOISE = 3
    POLICY = 4


def block_uniforms(seed: int, purpose: int, block: int, width: int) -> np.ndarray:
    """Uniforms in [0, 1) for rounds ``block*BLOCK + 1 .. (block+1)*BLOCK``.

    Returns an array of shape ``(BLOCK, width)``; row ``i`` belongs to round
    ``block * BLOCK + i + 1``.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    bitgen = np.random.Philox(key=[int(seed), int(purpose)], counter=[0, 0, int(block), 0])
    return np.random.Generator(bitgen).random((BLOCK, width))


class RoundStreams:
    """Random-access view of one replication's streams.

    ``widths`` maps each purpose to the number of uniforms consumed per round.
    Blocks are cached lazily, so sequential access costs one generator call per
    ``BLOCK`` rounds.
    """

    def __init__(self, seed: int, widths: dict[Purpose, int]):
        self.seed = int(seed)
        self.widths = dict(widths)
        self._cache: dict[tuple[int, int], np.ndarray] = {}

    def row(self, purpose: Purpose, t: int) -> np.ndarray:
        """Uniforms for round ``t`` (1-based)."""
        if t < 1:
            raise ValueError(f"round index must be >= 1, got {t}")
        block, offset = divmod(t - 1, BLOCK)
        key = (int(purpose), block)
        arr = self._cache.get(key)
        if arr is None:
            # keep at most one block per purpose
            for stale in [k for k in self._cache if k[0] == int(purpose)]:
                del self._cache[stale]
            arr = block_uniforms(self.seed, purpose, block, self.widths.get(purpose, 1))
            self._cache[key] = arr
        return arr[offset]


def batch_block(seeds: np.ndarray, purpose: Purpose, block: int, width: int) -> np.ndarray:
    """Stacked blocks for several seeds, shape ``(len(seeds), BLOCK, width)``."""
    return np.stack([block_uniforms(int(s), purpose, block, width) for s in seeds])
