"""Seeded random streams, one per simulated path."""

from dataclasses import dataclass, field

import numpy as np

MASK64 = (1 << 64) - 1


@dataclass
class RandomStream:
    """A reproducible generator addressed by ``(seed, stream_id)``.

    The stream id is used as the spawn key of a :class:`numpy.random.SeedSequence`,
    so distinct ids give independent PCG64 streams and the same pair always
    replays the same draws. ``gen`` is created once and advances as it is used.
    """

    seed: int
    stream_id: int = 0
    gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 <= self.seed <= MASK64 and 0 <= self.stream_id <= MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.gen = make_generator(self.seed, self.stream_id)

    def reset(self):
        self.gen = make_generator(self.seed, self.stream_id)
        return self


def make_generator(seed, stream_id=0):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng):
    """Accept a RandomStream, a numpy Generator, or an int seed."""
    if isinstance(rng, RandomStream):
        return rng.gen
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return make_generator(int(rng))
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(rng).__name__}")
