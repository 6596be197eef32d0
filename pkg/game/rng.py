"""
Per-episode coin streams.

Every episode draws from its own Philox4x64-10 stream (numpy.random.Philox)
keyed by the 128-bit value seed | (episode << 64) with the counter starting
at zero. A coin is the top bit of one 64-bit output word, 1 meaning Player I
wins the toss. Words are produced in blocks, and since the stream is a pure
function of (key, counter) the block size never changes the coin sequence.

Auxiliary randomness (the random Player I) uses a second stream whose
episode word has bit 63 set, so it never shares words with the coin stream.
"""
import logging
from typing import Optional

import numpy as np

from config.settings import settings
from models.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

AUXILIARY_FLAG = 1 << 63


def episode_key(seed: int, episode: int, auxiliary: bool = False) -> int:
    """128-bit Philox key for an episode substream."""
    if not 0 <= seed < 2 ** 64:
        raise ConfigurationError(f"seed {seed} is not a 64-bit unsigned integer", key='seed')
    if not 0 <= episode < AUXILIARY_FLAG:
        raise ConfigurationError(f"episode index {episode} out of range", key='episodes')
    word = episode | AUXILIARY_FLAG if auxiliary else episode
    return int(seed) | (int(word) << 64)


class CoinStream:
    """Buffered fair coins for one episode."""

    def __init__(self, seed: int, episode: int, block: Optional[int] = None):
        self.block = block or settings.game.coin_block
        self._bits = np.random.Philox(key=episode_key(seed, episode))
        self._buffer = np.empty(0, dtype=np.uint8)
        self._pos = 0
        self.drawn = 0

    def _refill(self) -> None:
        words = self._bits.random_raw(self.block)
        self._buffer = (words >> np.uint64(63)).astype(np.uint8)
        self._pos = 0

    def next(self) -> int:
        """Next coin, 1 when Player I wins the toss."""
        if self._pos >= len(self._buffer):
            self._refill()
        coin = int(self._buffer[self._pos])
        self._pos += 1
        self.drawn += 1
        return coin

    def take_block(self) -> np.ndarray:
        """Next `block` coins at once; used by the lockstep simulator."""
        if self._pos < len(self._buffer):
            rest = self._buffer[self._pos:]
            self._refill()
            out = np.concatenate([rest, self._buffer])[: self.block]
            self._pos = self.block - len(rest)
        else:
            self._refill()
            out = self._buffer
            self._pos = len(self._buffer)
        self.drawn += len(out)
        return out


def auxiliary_generator(seed: int, episode: int) -> np.random.Generator:
    """Generator on the auxiliary substream of an episode."""
    return np.random.Generator(np.random.Philox(key=episode_key(seed, episode, auxiliary=True)))
