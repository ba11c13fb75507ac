"""Deterministic, explicitly seeded random numbers.

Every stochastic step in the package draws from :class:`Rng`, a SplitMix64
generator.  SplitMix64 is counter based (output ``k`` depends only on the seed
and ``k``), so bulk draws vectorize in numpy and produce the exact same values
as scalar draws on every platform.
"""
import hashlib

import numpy as np

ALGORITHM = "splitmix64"

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix(z):
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _mix_array(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 stream.  Single owner; use :meth:`split` to hand out children."""

    __slots__ = ("state",)

    def __init__(self, seed=0):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.state = seed & _MASK

    def __repr__(self):
        return f"Rng(state={self.state:#018x})"

    def next_u64(self):
        self.state = (self.state + _GAMMA) & _MASK
        return _mix(self.state)

    def next_uniform(self):
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def next_below(self, n):
        """Integer in [0, n), free of modulo bias (rejection sampling)."""
        if n < 1:
            raise ValueError(f"next_below needs n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items):
        """Return a Fisher-Yates permuted copy of ``items``."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.next_below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def uniform_array(self, shape):
        """Array of uniforms in [0, 1); same values as repeated :meth:`next_uniform`."""
        n = int(np.prod(shape, dtype=np.int64))
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
            z = _mix_array(steps + np.uint64(self.state))
        self.state = (self.state + n * _GAMMA) & _MASK
        return ((z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))).reshape(shape)

    def split(self, label):
        """Child stream derived from (current state, label).  Does not advance self."""
        h = hashlib.blake2b(digest_size=8)
        h.update(self.state.to_bytes(8, "little"))
        h.update(str(label).encode("utf-8"))
        return Rng(int.from_bytes(h.digest(), "little"))


def derive_seed(base_seed, *labels):
    """Stable u64 seed for a keyed cell, e.g. ``derive_seed(7, "trial", 5, 3)``."""
    return Rng(base_seed).split("/".join(str(x) for x in labels)).state
