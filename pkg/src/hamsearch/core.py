"""Bit-level primitives for packed binary codes.

A code is a fixed-length bit vector packed into 64-bit words: bit ``i``
lives at bit ``i % 64`` (counting from the least significant end) of word
``i // 64``. Everything in this module is immutable after construction
and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

WORD_BITS = 64

# HAKMEM-style masked subtraction (memo item 169, widened to 64 bits).
# The first two masks reduce each aligned 3-bit group to its bit count;
# the third keeps the low half of each 6-bit group, the fourth the low
# half of each 12-bit group.
_TRIPLE_MASK_A = 0xB6DB6DB6DB6DB6DB
_TRIPLE_MASK_B = 0x9249249249249249
_SEXTET_MASK = 0x71C71C71C71C71C7
_TWELVE_MASK = 0xF03F03F03F03F03F

_WORD_MAX = (1 << 64) - 1


def word_count(nbits: int) -> int:
    """Number of 64-bit words needed to hold ``nbits`` bits."""
    return (nbits + WORD_BITS - 1) // WORD_BITS


def hakmem_popcount64(u):
    """Count set bits of a 64-bit word via masked subtraction.

    Reference implementation kept for verification; the production path
    is :func:`popcount64` / :func:`popcount_words`. Accepts a Python int
    in ``[0, 2**64)`` or a uint64 ndarray and counts each word's bits.

    The classic recipe ends with a fold modulo 63, which cannot represent
    counts of 63 or 64; we fold once more into 12-bit groups and reduce
    modulo 4095 instead, which is exact for every 64-bit input.
    """
    if isinstance(u, (int, np.integer)):
        u = int(u)
        if not 0 <= u <= _WORD_MAX:
            raise ValueError("input must be an unsigned 64-bit value")
    elif isinstance(u, np.ndarray):
        if u.dtype != np.uint64:
            raise ValueError("array input must have dtype uint64")
    else:
        raise TypeError(f"unsupported input type {type(u).__name__}")
    c = u - ((u >> 1) & _TRIPLE_MASK_A) - ((u >> 2) & _TRIPLE_MASK_B)
    c = (c + (c >> 3)) & _SEXTET_MASK
    return ((c + (c >> 6)) & _TWELVE_MASK) % 4095


def popcount64(u: int) -> int:
    """Set-bit count of one word using the interpreter's native popcount."""
    return int(u).bit_count()


def popcount_words(words: np.ndarray) -> np.ndarray:
    """Element-wise popcount of a uint64 array (production kernel)."""
    return np.bitwise_count(words)


@dataclass(frozen=True)
class BinaryCode:
    """One packed binary code of ``nbits`` bits.

    ``words`` holds ``ceil(nbits / 64)`` unsigned 64-bit values; unused
    high bits of the last word must be zero.
    """

    words: tuple
    nbits: int

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(int(w) for w in self.words))
        if self.nbits <= 0:
            raise ValueError("code length must be positive")
        expected = word_count(self.nbits)
        if len(self.words) != expected:
            raise ValueError(
                f"need {expected} words for {self.nbits} bits, got {len(self.words)}"
            )
        for w in self.words:
            if not 0 <= w <= _WORD_MAX:
                raise ValueError("words must be unsigned 64-bit values")
        spare = expected * WORD_BITS - self.nbits
        if spare and self.words[-1] >> (WORD_BITS - spare):
            raise ValueError("unused high bits of the last word must be zero")

    @classmethod
    def from_int(cls, value: int, nbits: int) -> "BinaryCode":
        if value < 0 or (nbits > 0 and value >> nbits):
            raise ValueError(f"value does not fit in {nbits} bits")
        words = [
            (value >> (i * WORD_BITS)) & _WORD_MAX for i in range(word_count(nbits))
        ]
        return cls(tuple(words), nbits)

    @classmethod
    def from_row(cls, row: np.ndarray, nbits: int) -> "BinaryCode":
        return cls(tuple(int(w) for w in row), nbits)

    def to_int(self) -> int:
        value = 0
        for i, w in enumerate(self.words):
            value |= w << (i * WORD_BITS)
        return value

    def to_row(self) -> np.ndarray:
        return np.array(self.words, dtype=np.uint64)

    def bit(self, i: int) -> int:
        if not 0 <= i < self.nbits:
            raise IndexError(f"bit index {i} out of range for {self.nbits}-bit code")
        return (self.words[i // WORD_BITS] >> (i % WORD_BITS)) & 1

    def popcount(self) -> int:
        return sum(popcount64(w) for w in self.words)


def hamming_distance(a: BinaryCode, b: BinaryCode) -> int:
    """Number of differing bit positions between two equal-length codes."""
    if a.nbits != b.nbits:
        raise ValueError(
            f"code lengths differ: {a.nbits} vs {b.nbits}"
        )
    return sum(popcount64(x ^ y) for x, y in zip(a.words, b.words))


def hamming_distances_packed(words: np.ndarray, query_row: np.ndarray) -> np.ndarray:
    """Distances from one query to every row of a packed (n, W) word matrix.

    This is the bit-operation linear-scan kernel: XOR plus word popcount,
    summed across words.
    """
    x = words ^ query_row
    out = popcount_words(x[:, 0]).astype(np.int32)
    for w in range(1, words.shape[1]):
        out += popcount_words(x[:, w])
    return out


@dataclass(frozen=True)
class SubCodeLayout:
    """Split of an ``nbits``-long code into contiguous segments.

    Every segment is ``segment_width`` bits wide except possibly the
    last, which is shorter when the width does not divide ``nbits``.
    Segment bit ranges partition ``[0, nbits)`` exactly.
    """

    nbits: int
    segment_count: int
    segment_width: int

    def __post_init__(self):
        if self.nbits <= 0 or self.segment_count <= 0 or self.segment_width <= 0:
            raise ValueError("layout dimensions must be positive")
        lo = (self.segment_count - 1) * self.segment_width
        hi = self.segment_count * self.segment_width
        if not lo < self.nbits <= hi:
            raise ValueError(
                f"{self.segment_count} segments of width {self.segment_width} "
                f"cannot partition {self.nbits} bits"
            )

    @classmethod
    def with_width(cls, nbits: int, width: int) -> "SubCodeLayout":
        if width <= 0:
            raise ValueError("segment width must be positive")
        return cls(nbits, (nbits + width - 1) // width, width)

    @classmethod
    def with_segment_count(cls, nbits: int, count: int) -> "SubCodeLayout":
        if count <= 0:
            raise ValueError("segment count must be positive")
        return cls(nbits, count, (nbits + count - 1) // count)

    def bit_range(self, i: int) -> tuple:
        if not 0 <= i < self.segment_count:
            raise IndexError(f"segment {i} out of range")
        start = i * self.segment_width
        return start, min(start + self.segment_width, self.nbits)

    def widths(self) -> list:
        return [stop - start for start, stop in
                (self.bit_range(i) for i in range(self.segment_count))]

    def segment_labels(self) -> np.ndarray:
        """Segment id of each bit position (the block structure)."""
        labels = np.empty(self.nbits, dtype=np.int32)
        for i in range(self.segment_count):
            start, stop = self.bit_range(i)
            labels[start:stop] = i
        return labels


def segment(code: BinaryCode, layout: SubCodeLayout) -> list:
    """Sub-code values of ``code`` under ``layout``, low segment first.

    Concatenating the returned values (each ``widths()[i]`` bits) in order
    reconstructs the code.
    """
    if layout.nbits != code.nbits:
        raise ValueError(
            f"layout covers {layout.nbits} bits but code has {code.nbits}"
        )
    value = code.to_int()
    parts = []
    for i in range(layout.segment_count):
        start, stop = layout.bit_range(i)
        parts.append((value >> start) & ((1 << (stop - start)) - 1))
    return parts


def unpack_rows(words: np.ndarray, nbits: int) -> np.ndarray:
    """Expand packed (n, W) words into an (n, nbits) 0/1 uint8 matrix."""
    words = np.ascontiguousarray(words, dtype="<u8")
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :nbits]


def pack_rows(bits: np.ndarray, nbits: int) -> np.ndarray:
    """Pack an (n, nbits) 0/1 matrix back into (n, W) uint64 words."""
    if bits.shape[1] != nbits:
        raise ValueError("bit matrix width does not match nbits")
    nwords = word_count(nbits)
    packed = np.packbits(bits, axis=1, bitorder="little")
    if packed.shape[1] < nwords * 8:
        pad = np.zeros((packed.shape[0], nwords * 8 - packed.shape[1]), dtype=np.uint8)
        packed = np.hstack([packed, pad])
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)
