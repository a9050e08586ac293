"""Term-match baseline: per-position posting lists.

Every bit position gets two posting lists, one with the ids whose bit is
one and one with the ids whose bit is zero. A query walks exactly one
list per position (the one matching its own bit) and counts hits per
code; distance is ``nbits - matches``. Cost is linear in n regardless of
the radius, which is the point of keeping it as the measured baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinaryCode, unpack_rows
from .store import CodeDataset


@dataclass(frozen=True)
class PositionPostings:
    """Sorted id lists per bit position; ones[p] and zeros[p] partition 0..n-1."""

    ones: list
    zeros: list
    size: int
    nbits: int


def build_position_postings(ds: CodeDataset) -> PositionPostings:
    bits = unpack_rows(ds.words, ds.nbits)
    ones = []
    zeros = []
    for p in range(ds.nbits):
        col = bits[:, p]
        ones.append(np.flatnonzero(col).astype(np.int32))
        zeros.append(np.flatnonzero(col == 0).astype(np.int32))
    return PositionPostings(ones=ones, zeros=zeros, size=len(ds), nbits=ds.nbits)


def term_match_search(pp: PositionPostings, query: BinaryCode, radius: int):
    """All (id, distance) pairs within ``radius`` of ``query``.

    Returns two aligned arrays (ids ascending, distances). The accumulator
    is a dense per-query array because the baseline scores every code.
    """
    if query.nbits != pp.nbits:
        raise ValueError(f"query has {query.nbits} bits, postings {pp.nbits}")
    if not 0 <= radius <= pp.nbits:
        raise ValueError(f"radius {radius} outside [0, {pp.nbits}]")
    matches = np.zeros(pp.size, dtype=np.uint16)
    qvalue = query.to_int()
    for p in range(pp.nbits):
        chosen = pp.ones[p] if (qvalue >> p) & 1 else pp.zeros[p]
        matches[chosen] += 1
    ids = np.flatnonzero(matches >= pp.nbits - radius)
    distances = pp.nbits - matches[ids].astype(np.int32)
    return ids.astype(np.int64), distances
