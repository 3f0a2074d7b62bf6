"""
Named, counter-based random streams.

All randomness flows from one integer seed. A stream is identified by the
seed plus a key such as ("orthant", replicate, dim); the key is folded into a
SeedSequence spawn key and drives a Philox generator, so the numbers a stream
produces never depend on which thread or in which order it was created.
"""
import zlib
from typing import Tuple, Union

import numpy as np

KeyPart = Union[int, str]


def _encode(part: KeyPart) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"stream key parts must be non-negative, got {part}")
    return int(part)


def stream_key(*parts: KeyPart) -> Tuple[int, ...]:
    return tuple(_encode(p) for p in parts)


def stream(seed: int, *parts: KeyPart) -> np.random.Generator:
    """Return the generator for `seed` and the named substream `parts`."""
    seq = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=stream_key(*parts))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed: int, *parts: KeyPart) -> int:
    """A 63-bit child seed, for handing a sub-seed to code that takes plain ints."""
    seq = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=stream_key(*parts))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


__all__ = ["stream", "stream_key", "derive_seed"]
