"""Reproducible random streams.

Two flavours are exposed.  Python-level code draws from numpy ``Generator``
objects backed by the counter-based Philox bit generator; every named or
indexed substream is derived from the master seed through ``SeedSequence``
spawn keys, so streams are independent and order-insensitive.  The numba
sampling kernels use a cheap splitmix64 stream keyed by ``(kernel_seed,
sample_index)``, which makes sample ``i`` of a batch identical no matter how
the batch is split across calls or threads.
"""

from __future__ import annotations

import hashlib
import secrets

import numpy as np

__all__ = ["Streams", "fresh_seed", "as_streams"]

_MASK64 = (1 << 64) - 1


def fresh_seed() -> int:
    """Draw a new 63-bit master seed from the OS entropy pool."""
    return secrets.randbits(63)


def _key(label) -> tuple[int, ...]:
    if isinstance(label, (int, np.integer)):
        return (int(label) & 0xFFFFFFFF,)
    if isinstance(label, tuple):
        out: tuple[int, ...] = ()
        for part in label:
            out += _key(part)
        return out
    digest = hashlib.blake2b(str(label).encode(), digest_size=8).digest()
    return (int.from_bytes(digest[:4], "little"), int.from_bytes(digest[4:], "little"))


class Streams:
    """Tree of independent random streams derived from one master seed.

    ``child(label)`` returns a new ``Streams`` rooted at the sub-key, so
    callers can hand a private subtree to each trial / round / worker.
    """

    def __init__(self, seed: int | None = None, _path: tuple[int, ...] = ()):
        self.seed = fresh_seed() if seed is None else int(seed)
        self._path = _path

    def child(self, label) -> "Streams":
        return Streams(self.seed, self._path + _key(label))

    def generator(self, label="main") -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self._path + _key(label))
        return np.random.Generator(np.random.Philox(ss))

    def kernel_seed(self, label="kernel") -> int:
        """64-bit key for the numba splitmix streams."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self._path + _key(label))
        lo, hi = ss.generate_state(2, dtype=np.uint32)
        return ((int(hi) << 32) | int(lo)) & _MASK64

    def __repr__(self) -> str:
        return f"Streams(seed={self.seed}, path={self._path})"


def as_streams(rng) -> Streams:
    """Accept a ``Streams``, an int seed or ``None``."""
    if isinstance(rng, Streams):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return Streams(rng)
    raise TypeError(f"expected Streams, int seed or None, got {type(rng).__name__}")
