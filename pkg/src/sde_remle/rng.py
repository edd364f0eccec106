"""Counter-based random number streams.

Every stochastic routine in the package draws from a Philox generator keyed
by the triple (seed, stream_id, replicate_id). The key is packed explicitly,
so a given triple produces a bit-identical sequence on every platform and
under any execution order, which is what makes parallel runs reproducible.
"""

from dataclasses import dataclass

import numpy as np

_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF

# stream_id reserved for drawing the per-replicate random effects; subject
# path streams use stream_id = subject index, which must stay below this.
PHI_STREAM_ID = _MASK32


def _packed_key(seed, stream_id, replicate_id):
    if not 0 <= seed <= _MASK64:
        raise ValueError("seed must fit in 64 bits")
    if not 0 <= stream_id <= _MASK32:
        raise ValueError("stream_id must fit in 32 bits")
    if not 0 <= replicate_id <= _MASK32:
        raise ValueError("replicate_id must fit in 32 bits")
    return np.array([seed, (stream_id << 32) | replicate_id], dtype=np.uint64)


def generator(seed, stream_id, replicate_id):
    """Return a fresh Generator for the given stream triple."""
    key = _packed_key(seed, stream_id, replicate_id)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class RngStream:
    """Address of one substream: (seed, stream_id, replicate_id)."""

    seed: int
    stream_id: int
    replicate_id: int

    def __post_init__(self):
        _packed_key(self.seed, self.stream_id, self.replicate_id)

    def generator(self):
        return generator(self.seed, self.stream_id, self.replicate_id)


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed, *parts):
    """Mix a master seed with integer labels into a fresh 64-bit seed.

    Used by the experiment engines to give nested Monte Carlo passes
    (information, divergence, and limit estimation) their own seed lanes
    that cannot collide with subject path streams.
    """
    x = seed & _MASK64
    for p in parts:
        x = _splitmix64(x ^ (p & _MASK64))
    return x


def float_label(value):
    """The IEEE-754 bit pattern of a float, as an integer label for derive_seed."""
    return int(np.float64(value).view(np.uint64))
