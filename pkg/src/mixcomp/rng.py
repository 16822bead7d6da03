"""Shared randomness: deterministic, platform-independent substreams.

Every random draw made by the protocol comes from a :class:`Stream` keyed by
``(master_seed, purpose, *indices)``. The key is a BLAKE2b digest of a
canonical byte encoding of the tuple, and the stream itself is the raw
output of the Philox4x64-10 counter-based generator. Only ``random_raw`` is
used, so the derived floats and integers do not depend on numpy's
higher-level sampling algorithms, which are not version-stable.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_CHUNK = 256

DEFAULT_SEED_ENV = "MIXCOMP_SEED"


def default_seed(fallback: int = 0) -> int:
    """Seed from the ``MIXCOMP_SEED`` environment variable, else ``fallback``."""
    value = os.environ.get(DEFAULT_SEED_ENV)
    return int(value) if value not in (None, "") else fallback


def _encode_part(part) -> bytes:
    if isinstance(part, bool):
        part = int(part)
    if isinstance(part, int):
        raw = part.to_bytes(16, "little", signed=True)
        return b"i" + raw
    if isinstance(part, str):
        raw = part.encode("utf-8")
        return b"s" + len(raw).to_bytes(4, "little") + raw
    raise TypeError(f"stream key parts must be int or str, got {type(part).__name__}")


def derive_key(master_seed: int, *parts) -> int:
    """128-bit Philox key for the substream ``(master_seed, *parts)``."""
    h = hashlib.blake2b(digest_size=16, person=b"mixcomp-stream")
    h.update(_encode_part(int(master_seed)))
    for p in parts:
        h.update(_encode_part(p))
    return int.from_bytes(h.digest(), "little")


class Stream:
    """A single deterministic substream of 64-bit words.

    Floats are 53-bit uniforms on [0, 1); bounded integers use rejection
    sampling on the top of the 128-bit product (Lemire), so results are
    exactly uniform.
    """

    def __init__(self, master_seed: int, *parts):
        self.key = derive_key(master_seed, *parts)
        self._bitgen = np.random.Philox(key=self.key, counter=0)
        self._buf: list[int] = []
        self._pos = 0

    def next_u64(self) -> int:
        if self._pos >= len(self._buf):
            self._buf = [int(v) for v in self._bitgen.random_raw(_CHUNK)]
            self._pos = 0
        v = self._buf[self._pos]
        self._pos += 1
        return v

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniforms(self, k: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(k)], dtype=float)

    def bounded(self, m: int) -> int:
        """Uniform integer in ``[0, m)``."""
        if m <= 0:
            raise ValueError("bound must be positive")
        if m == 1:
            return 0
        if m > _MASK64:
            # arbitrary precision: rejection on enough 64-bit words
            bits = m.bit_length()
            words = (bits + 63) // 64
            while True:
                v = 0
                for _ in range(words):
                    v = (v << 64) | self.next_u64()
                v >>= words * 64 - bits
                if v < m:
                    return v
        x = self.next_u64()
        prod = x * m
        low = prod & _MASK64
        if low < m:
            threshold = ((1 << 64) - m) % m
            while low < threshold:
                x = self.next_u64()
                prod = x * m
                low = prod & _MASK64
        return prod >> 64

    def categorical(self, cdf: np.ndarray) -> int:
        """Index ``i`` with ``cdf[i-1] <= u < cdf[i]``; ``cdf[-1]`` is taken as 1."""
        u = self.uniform()
        i = int(np.searchsorted(cdf, u, side="right"))
        return min(i, len(cdf) - 1)

    def geometric_failures(self, r: float) -> float:
        """Number of failures before the first success of a Bernoulli(r) sequence.

        Returned as a float because it can exceed the range of machine
        integers when ``r`` is tiny; ``inf`` when ``r == 0``.
        """
        if r >= 1.0:
            return 0.0
        if r <= 0.0:
            return math.inf
        u = 1.0 - self.uniform()  # in (0, 1]
        return math.floor(math.log(u) / math.log1p(-r))


def uniform_array(master_seed: int, *parts, size: int) -> np.ndarray:
    """``size`` 53-bit uniforms from a fresh substream, vectorised."""
    bitgen = np.random.Philox(key=derive_key(master_seed, *parts), counter=0)
    raw = bitgen.random_raw(size)
    return (raw >> np.uint64(11)).astype(float) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class SharedRandomness:
    """The common random source of encoder and decoder.

    Substreams are addressed by purpose tag plus integer indices, so both
    sides can regenerate any draw independently and the layout does not
    depend on which branch of the protocol a trial takes.
    """

    master_seed: int

    def stream(self, purpose: str, *indices: int) -> Stream:
        return Stream(self.master_seed, purpose, *indices)
