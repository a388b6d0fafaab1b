from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

_MASK32 = 0xFFFFFFFF


@dataclass(frozen=True)
class RandomStream:
    """
    Addressable random stream backed by the counter-based Philox generator.

    A stream is identified by (seed, stream_id) plus optional substream keys; the same
    address always yields the same draws, regardless of the order or the process in
    which streams are consumed.
    """
    seed: int
    stream_id: int = 0
    keys: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0 or any(k < 0 for k in self.keys):
            raise ValueError("seed, stream_id and substream keys must be non-negative")
        if self.seed >= 2**64 or self.stream_id >= 2**64:
            raise ValueError("seed and stream_id must fit in 64 bits")
        if any(k > _MASK32 for k in self.keys):
            raise ValueError("substream keys must fit in 32 bits")

    def _entropy(self) -> np.random.SeedSequence:
        # fixed-width words for the root; keys go in the spawn key so zero keys stay distinct
        root = [self.seed & _MASK32, self.seed >> 32, self.stream_id & _MASK32, self.stream_id >> 32]
        return np.random.SeedSequence(entropy=root, spawn_key=self.keys)

    def generator(self) -> np.random.Generator:
        """Fresh numpy Generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(self._entropy()))

    def substream(self, *keys: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id, self.keys + tuple(int(k) for k in keys))

    def with_id(self, stream_id: int) -> "RandomStream":
        return RandomStream(self.seed, int(stream_id), self.keys)

    def torch_seed(self) -> int:
        """63-bit integer for seeding a torch.Generator from this stream."""
        words = self._entropy().generate_state(2, dtype=np.uint32)
        return ((int(words[0]) & 0x7FFFFFFF) << 32) | int(words[1])
