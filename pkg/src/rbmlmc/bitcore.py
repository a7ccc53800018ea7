"""Seedable sources of random bits and random numbers with exact cost accounting.

Every Monte Carlo experiment in this package is charged in one of two
currencies: fair random bits (for the bit-based drivers) or calls to a
uniform random number generator (for the classical driver).  A
:class:`BitSource` owns one underlying generator and a :class:`CostLedger`
that tallies both currencies exactly.  A source never mixes currencies on
its own: bit-consuming operations touch only ``bits_drawn`` and
number-consuming operations touch only ``numbers_drawn``.

The generator is Philox, a counter-based PRNG.  The pair
``(seed, stream_id)`` is used verbatim as the 128-bit Philox key, so
distinct stream ids yield independent streams by construction, with no
coordination or jump-ahead bookkeeping.

Bit order convention: bits are taken from dedicated 64-bit generator
words, most significant bit first, and words are consumed in generation
order.  Leftover bits of a partially used word are buffered, so the bit
stream is a well-defined sequence independent of how draws are chunked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = ["CostLedger", "BitSource", "FixedBits", "bits_to_indices"]

_U64_MAX = np.iinfo(np.uint64).max


def bits_to_indices(bits: np.ndarray, q: int, count: int) -> np.ndarray:
    """Pack ``count`` groups of ``q`` bits (MSB first) into int64 indices."""
    groups = bits.reshape(count, q)
    out = groups[:, 0].astype(np.int64)
    for t in range(1, q):
        np.left_shift(out, 1, out=out)
        np.bitwise_or(out, groups[:, t], out=out)
    return out


@dataclass
class CostLedger:
    """Exact tally of randomness consumed by a source.

    ``bits_drawn`` counts fair random bits, ``numbers_drawn`` counts calls
    for a full-precision uniform (one per standard normal as well).  Both
    counts are monotone non-decreasing over a source's lifetime.
    """

    bits_drawn: int = 0
    numbers_drawn: int = 0

    def copy(self) -> "CostLedger":
        return CostLedger(self.bits_drawn, self.numbers_drawn)

    def add(self, other: "CostLedger") -> None:
        """Merge another ledger into this one (used after joining tasks)."""
        self.bits_drawn += other.bits_drawn
        self.numbers_drawn += other.numbers_drawn

    def delta_since(self, snapshot: "CostLedger") -> "CostLedger":
        return CostLedger(
            self.bits_drawn - snapshot.bits_drawn,
            self.numbers_drawn - snapshot.numbers_drawn,
        )


class BitSource:
    """Deterministic stream of fair bits and of uniform/Gaussian numbers.

    Identical ``(seed, stream_id)`` pairs reproduce identical streams;
    distinct pairs give independent streams (Philox counter-based keying).
    A source is single-owner: parallel workers each get their own source
    with a distinct ``stream_id`` and ledgers are merged by summation.
    """

    def __init__(self, seed: int, stream_id: int = 0) -> None:
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array(
            [self.seed & _U64_MAX, self.stream_id & _U64_MAX], dtype=np.uint64
        )
        self._rng = np.random.Generator(np.random.Philox(key=key))
        self.ledger = CostLedger()
        # buffered tail of the current word, most significant bit first
        self._bit_buffer = np.empty(0, dtype=np.uint8)

    def __repr__(self) -> str:  # pragma: no cover
        return f"BitSource(seed={self.seed}, stream_id={self.stream_id})"

    # -- random bits ----------------------------------------------------

    def draw_bits(self, n: int) -> np.ndarray:
        """Return ``n`` fair bits as a uint8 array of 0/1 values.

        Charges exactly ``n`` to ``bits_drawn``.
        """
        if n < 0:
            raise ValueError(f"bit count must be >= 0, got {n}")
        if n == 0:
            return np.empty(0, dtype=np.uint8)
        have = self._bit_buffer.size
        if n <= have:
            out = self._bit_buffer[:n]
            self._bit_buffer = self._bit_buffer[n:]
        else:
            n_words = (n - have + 63) // 64
            words = self._rng.integers(
                _U64_MAX, size=n_words, dtype=np.uint64, endpoint=True
            )
            # big-endian byte view makes unpackbits yield MSB-first per word
            fresh = np.unpackbits(words.astype(">u8").view(np.uint8))
            pool = np.concatenate([self._bit_buffer, fresh]) if have else fresh
            out = pool[:n]
            self._bit_buffer = pool[n:]
        self.ledger.bits_drawn += n
        return out

    def draw_index_block(self, q: int, shape) -> np.ndarray:
        """Draw uniform integers on ``[0, 2**q)``, each from exactly q bits.

        Bits fill each index most significant bit first, indices in C order
        of ``shape``.  Charges ``q * prod(shape)`` bits.
        """
        if not 1 <= q <= 62:
            raise ValueError(f"bits per index must be in 1..62, got {q}")
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        return bits_to_indices(self.draw_bits(q * count), q, count).reshape(shape)

    # -- random numbers -------------------------------------------------

    def draw_uniform01(self, size=None):
        """Uniform variate(s) on [0, 1); one ledger unit per variate."""
        u = self._rng.random(size)
        self.ledger.numbers_drawn += 1 if size is None else int(np.prod(size))
        return u

    def draw_std_normal(self, size=None):
        """Standard normal variate(s) via inversion of ``draw_uniform01``.

        One ledger unit per variate, charged to ``numbers_drawn``.  An
        exact-zero uniform (probability 2^-53 per draw) is nudged to 2^-54
        so the inverse CDF stays finite.
        """
        u = self.draw_uniform01(size)
        if size is None:
            return float(ndtri(u if u > 0.0 else 2.0**-54))
        np.maximum(u, 2.0**-54, out=u)
        return ndtri(u)


class FixedBits:
    """Bit source replaying a preset bit pattern; for exhaustive enumeration.

    Implements the bit-drawing surface of :class:`BitSource` (including the
    ledger) but serves a fixed finite sequence.  Number draws are not
    supported, matching the pure-bit cost model.
    """

    def __init__(self, bits) -> None:
        self._bits = np.asarray(bits, dtype=np.uint8).ravel()
        if self._bits.size and not np.all((self._bits == 0) | (self._bits == 1)):
            raise ValueError("bit pattern must contain only 0s and 1s")
        self._pos = 0
        self.ledger = CostLedger()

    @classmethod
    def from_int(cls, pattern: int, n_bits: int) -> "FixedBits":
        """Encode ``pattern`` as ``n_bits`` bits, most significant first."""
        bits = [(pattern >> (n_bits - 1 - t)) & 1 for t in range(n_bits)]
        return cls(bits)

    @property
    def remaining(self) -> int:
        return self._bits.size - self._pos

    def draw_bits(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError(f"bit count must be >= 0, got {n}")
        if n > self.remaining:
            raise ValueError(f"pattern exhausted: need {n}, have {self.remaining}")
        out = self._bits[self._pos : self._pos + n]
        self._pos += n
        self.ledger.bits_drawn += n
        return out

    def draw_index_block(self, q: int, shape) -> np.ndarray:
        if not 1 <= q <= 62:
            raise ValueError(f"bits per index must be in 1..62, got {q}")
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        return bits_to_indices(self.draw_bits(q * count), q, count).reshape(shape)

    def draw_uniform01(self, size=None):
        raise TypeError("FixedBits serves bits only")

    def draw_std_normal(self, size=None):
        raise TypeError("FixedBits serves bits only")
