"""Sub-code inverted index: pigeonhole candidate filtering.

Codes are cut into segments; a code within radius ``r`` of the query must
agree with it within ``floor(r / segment_count)`` on at least one
segment. The index maps (segment, sub-code value) to the sorted ids
holding that value, so the candidate set is the union of posting lists
for every value inside the per-segment Hamming ball, and only candidates
get a full distance check.

Each segment stores the *bit positions* it covers. Without a permutation
those are contiguous ranges; with one they are the permuted positions,
which is the only difference between a plain and a permuted index — the
lookup and verification paths are identical.
"""

from __future__ import annotations

import struct
from itertools import combinations

import numpy as np

from .core import (
    BinaryCode,
    SubCodeLayout,
    hamming_distances_packed,
    unpack_rows,
)
from .errors import IndexFormatError, PermutationMismatchError
from .store import CodeDataset

MAX_FILTER_WIDTH = 32
_DENSE_WIDTH_LIMIT = 16
_BUILD_CHUNK = 1 << 16

FIDX_MAGIC = b"FIDX"
FIDX_VERSION = 1
_FIDX_HEADER = struct.Struct("<4sHIQHHQ")


def enumerate_ball(center: int, width: int, radius: int) -> list:
    """All ``width``-bit values within Hamming distance ``radius`` of ``center``.

    Ordered by distance, then ascending value, so outputs are stable for
    golden tests. Size is ``sum(C(width, j) for j <= radius)``.
    """
    if width <= 0 or width > 64:
        raise ValueError("width must be in [1, 64]")
    if not 0 <= center < (1 << width):
        raise ValueError(f"center does not fit in {width} bits")
    if radius < 0 or radius > width:
        raise ValueError(f"ball radius {radius} outside [0, {width}]")
    out = [center]
    for dist in range(1, radius + 1):
        ring = [
            center ^ sum(1 << b for b in flips)
            for flips in combinations(range(width), dist)
        ]
        ring.sort()
        out.extend(ring)
    return out


class SubcodeInvertedIndex:
    """Posting lists keyed by (segment, sub-code value).

    ``groups[i]`` is the array of original bit positions covered by
    segment ``i``. Postings within a segment partition 0..n-1 and are
    sorted ascending.
    """

    def __init__(self, layout: SubCodeLayout, groups, tables, dataset: CodeDataset,
                 perm_digest: int = 0):
        self.layout = layout
        self.groups = [np.asarray(g, dtype=np.int32) for g in groups]
        self._tables = tables
        self.dataset = dataset
        self.perm_digest = perm_digest

    @property
    def size(self) -> int:
        return len(self.dataset)

    def postings(self, seg: int, value: int) -> np.ndarray:
        """Sorted ids whose segment ``seg`` equals ``value`` (may be empty)."""
        table = self._tables[seg]
        if isinstance(table, dict):
            return table.get(value, _EMPTY_IDS)
        starts, ids = table
        return ids[starts[value]:starts[value + 1]]

    def present_values(self, seg: int):
        """Ascending (value, ids) pairs for every observed value in ``seg``."""
        table = self._tables[seg]
        if isinstance(table, dict):
            for value in sorted(table):
                yield value, table[value]
        else:
            starts, ids = table
            counts = np.diff(starts)
            for value in np.flatnonzero(counts):
                v = int(value)
                yield v, ids[starts[v]:starts[v + 1]]

    def query_values(self, query: BinaryCode) -> list:
        """Sub-code value of ``query`` for each segment's bit positions."""
        qvalue = query.to_int()
        out = []
        for group in self.groups:
            v = 0
            for k, pos in enumerate(group):
                v |= ((qvalue >> int(pos)) & 1) << k
            out.append(v)
        return out


_EMPTY_IDS = np.empty(0, dtype=np.int32)


def _segment_groups(layout: SubCodeLayout, permutation=None) -> list:
    groups = []
    for i in range(layout.segment_count):
        start, stop = layout.bit_range(i)
        if permutation is None:
            groups.append(np.arange(start, stop, dtype=np.int32))
        else:
            groups.append(permutation.mapping[start:stop].astype(np.int32))
    return groups


def _segment_values(ds: CodeDataset, groups) -> list:
    """Per-segment value arrays, computed chunk-wise over unpacked bits."""
    n = len(ds)
    values = [np.empty(n, dtype=np.uint32) for _ in groups]
    for lo in range(0, n, _BUILD_CHUNK):
        hi = min(lo + _BUILD_CHUNK, n)
        bits = unpack_rows(ds.words[lo:hi], ds.nbits)
        for seg, group in enumerate(groups):
            acc = np.zeros(hi - lo, dtype=np.uint32)
            for k, pos in enumerate(group):
                acc |= bits[:, pos].astype(np.uint32) << np.uint32(k)
            values[seg][lo:hi] = acc
    return values


def build_index(ds: CodeDataset, layout: SubCodeLayout, permutation=None
                ) -> SubcodeInvertedIndex:
    """Index ``ds`` under ``layout``, optionally grouping permuted bits.

    With a permutation, segment ``i`` covers the bit positions that the
    permuted code's ``i``-th segment would hold; ids and verification
    still refer to the original codes, since distances are unchanged by
    reordering bits.
    """
    if layout.nbits != ds.nbits:
        raise ValueError(
            f"layout covers {layout.nbits} bits but dataset codes have {ds.nbits}"
        )
    if layout.segment_width > MAX_FILTER_WIDTH:
        raise ValueError(
            f"filter segment width {layout.segment_width} exceeds {MAX_FILTER_WIDTH}"
        )
    if permutation is not None and permutation.nbits != ds.nbits:
        raise ValueError("permutation length does not match dataset")
    groups = _segment_groups(layout, permutation)
    values = _segment_values(ds, groups)
    tables = [_build_table(v, len(groups[seg])) for seg, v in enumerate(values)]
    digest = 0 if permutation is None else permutation.digest()
    return SubcodeInvertedIndex(layout, groups, tables, ds, digest)


def _build_table(values: np.ndarray, width: int):
    order = np.argsort(values, kind="stable").astype(np.int32)
    if width <= _DENSE_WIDTH_LIMIT:
        counts = np.bincount(values, minlength=1 << width)
        starts = np.zeros((1 << width) + 1, dtype=np.int64)
        np.cumsum(counts, out=starts[1:])
        return starts, order
    sorted_vals = values[order]
    uniq, first = np.unique(sorted_vals, return_index=True)
    table = {}
    bounds = np.append(first, len(order))
    for j, value in enumerate(uniq):
        table[int(value)] = order[bounds[j]:bounds[j + 1]]
    return table


def candidates(idx: SubcodeInvertedIndex, query: BinaryCode, radius: int) -> np.ndarray:
    """Sorted id superset of the true ``radius``-neighbor set.

    Union over segments of the posting lists for every value within
    ``floor(radius / segment_count)`` of the query's sub-code.
    """
    layout = idx.layout
    if query.nbits != layout.nbits:
        raise ValueError(f"query has {query.nbits} bits, index {layout.nbits}")
    if not 0 <= radius <= layout.nbits:
        raise ValueError(f"radius {radius} outside [0, {layout.nbits}]")
    seg_radius = radius // layout.segment_count
    qvals = idx.query_values(query)
    n = idx.size
    seen = np.zeros(n, dtype=bool)
    parts = []
    for seg, group in enumerate(idx.groups):
        width = len(group)
        t = min(seg_radius, width)
        if t == width:
            # Ball covers the whole value space, so every id qualifies.
            return np.arange(n, dtype=np.int32)
        seg_ids = _segment_matches(idx, seg, qvals[seg], width, t)
        if seg_ids.size == 0:
            continue
        fresh = seg_ids[~seen[seg_ids]]
        seen[fresh] = True
        parts.append(fresh)
    if not parts:
        return _EMPTY_IDS
    merged = np.concatenate(parts)
    merged.sort()
    return merged


def _segment_matches(idx, seg, center, width, t) -> np.ndarray:
    """Ids whose segment value lies within distance ``t`` of ``center``."""
    if t == 0:
        return idx.postings(seg, center)
    table = idx._tables[seg]
    if isinstance(table, dict):
        ball_size = sum(_binomial(width, j) for j in range(t + 1))
        if ball_size > len(table):
            # Cheaper to test each present value than to enumerate the ball.
            hits = [ids for value, ids in table.items()
                    if (value ^ center).bit_count() <= t]
            return np.concatenate(hits) if hits else _EMPTY_IDS
    hits = [idx.postings(seg, v) for v in enumerate_ball(center, width, t)]
    hits = [h for h in hits if h.size]
    return np.concatenate(hits) if hits else _EMPTY_IDS


def _binomial(n: int, k: int) -> int:
    from math import comb
    return comb(n, k)


def filtered_search(idx: SubcodeInvertedIndex, query: BinaryCode, radius: int):
    """Exact r-neighbor search: candidate filter plus distance verification.

    Returns (ids, distances, candidate_count); ids ascending.
    """
    cand = candidates(idx, query, radius)
    if cand.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int32), 0
    dists = hamming_distances_packed(idx.dataset.words[cand], query.to_row())
    keep = dists <= radius
    return cand[keep].astype(np.int64), dists[keep], int(cand.size)


# --- FIDX persistence -------------------------------------------------------

def _encode_uvarints(values: np.ndarray) -> bytes:
    """LEB128-encode a uint64 array, vectorized over values."""
    v = np.ascontiguousarray(values, dtype=np.uint64)
    nbytes = np.ones(len(v), dtype=np.int64)
    for k in range(1, 10):
        nbytes += (v >= (1 << (7 * k))).astype(np.int64)
    offsets = np.zeros(len(v), dtype=np.int64)
    np.cumsum(nbytes[:-1], out=offsets[1:])
    out = np.zeros(int(nbytes.sum()), dtype=np.uint8)
    for k in range(10):
        active = nbytes > k
        if not active.any():
            break
        chunk = (v[active] >> np.uint64(7 * k)) & np.uint64(0x7F)
        more = (nbytes[active] - 1 > k)
        out[offsets[active] + k] = chunk.astype(np.uint8) | (more.astype(np.uint8) << 7)
    return out.tobytes()


def _decode_uvarints(buf: np.ndarray, count: int, offset: int):
    """Decode ``count`` LEB128 values from ``buf`` starting at ``offset``."""
    if count == 0:
        return np.empty(0, dtype=np.uint64), offset
    terminators = np.flatnonzero(buf[offset:] < 0x80)
    if len(terminators) < count:
        raise IndexFormatError("truncated varint stream")
    ends = terminators[:count] + offset
    starts = np.empty(count, dtype=np.int64)
    starts[0] = offset
    starts[1:] = ends[:-1] + 1
    lengths = ends - starts + 1
    if (lengths > 10).any():
        raise IndexFormatError("varint longer than 10 bytes")
    values = np.zeros(count, dtype=np.uint64)
    for k in range(int(lengths.max())):
        active = lengths > k
        chunk = buf[starts[active] + k].astype(np.uint64) & np.uint64(0x7F)
        values[active] |= chunk << np.uint64(7 * k)
    return values, int(ends[-1]) + 1


def save_index(idx: SubcodeInvertedIndex, path) -> None:
    """Write the index: header, then per-segment (value, count, id-delta) varints."""
    layout = idx.layout
    parts = [
        _FIDX_HEADER.pack(
            FIDX_MAGIC,
            FIDX_VERSION,
            layout.nbits,
            idx.size,
            layout.segment_count,
            layout.segment_width,
            idx.perm_digest,
        )
    ]
    for seg in range(layout.segment_count):
        entries = list(idx.present_values(seg))
        parts.append(_encode_uvarints(np.array([len(entries)], dtype=np.uint64)))
        for value, ids in entries:
            deltas = np.empty(len(ids), dtype=np.uint64)
            deltas[0] = ids[0]
            np.subtract(ids[1:], ids[:-1], out=deltas[1:], casting="unsafe")
            head = np.array([value, len(ids)], dtype=np.uint64)
            parts.append(_encode_uvarints(head))
            parts.append(_encode_uvarints(deltas))
    try:
        with open(path, "wb") as fh:
            fh.write(b"".join(parts))
            fh.flush()
            import os
            os.fsync(fh.fileno())
    except OSError as exc:
        raise OSError(f"writing index to {path}: {exc}") from exc


def load_index(path, dataset: CodeDataset, permutation=None) -> SubcodeInvertedIndex:
    """Reload an index, checking it matches ``dataset`` and ``permutation``."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"reading index from {path}: {exc}") from exc
    if len(raw) < _FIDX_HEADER.size or raw[:4] != FIDX_MAGIC:
        raise IndexFormatError(f"{path}: not an FIDX file (bad magic)")
    magic, version, nbits, count, seg_count, seg_width, digest = (
        _FIDX_HEADER.unpack_from(raw)
    )
    if version != FIDX_VERSION:
        raise IndexFormatError(f"{path}: unsupported FIDX version {version}")
    if nbits != dataset.nbits or count != len(dataset):
        raise IndexFormatError(
            f"{path}: index is for n={count}, m={nbits}; dataset has "
            f"n={len(dataset)}, m={dataset.nbits}"
        )
    if digest == 0:
        if permutation is not None:
            raise PermutationMismatchError(
                f"{path}: index was built without a permutation"
            )
    else:
        if permutation is None:
            raise PermutationMismatchError(
                f"{path}: index needs its permutation sidecar (digest {digest:#x})"
            )
        if permutation.digest() != digest:
            raise PermutationMismatchError(
                f"{path}: permutation digest {permutation.digest():#x} does not "
                f"match index digest {digest:#x}"
            )
    layout = SubCodeLayout(nbits, seg_count, seg_width)
    groups = _segment_groups(layout, permutation)
    buf = np.frombuffer(raw, dtype=np.uint8)
    offset = _FIDX_HEADER.size
    tables = []
    for seg in range(seg_count):
        width = len(groups[seg])
        (n_entries,), offset = _decode_uvarints(buf, 1, offset)
        entries = []
        total = 0
        previous = -1
        for _ in range(int(n_entries)):
            head, offset = _decode_uvarints(buf, 2, offset)
            value, n_ids = int(head[0]), int(head[1])
            if value >> width:
                raise IndexFormatError(f"{path}: value {value} too wide for segment")
            if value <= previous:
                raise IndexFormatError(f"{path}: segment values out of order")
            previous = value
            deltas, offset = _decode_uvarints(buf, n_ids, offset)
            ids = np.cumsum(deltas).astype(np.int32)
            entries.append((value, ids))
            total += n_ids
        if total != count:
            raise IndexFormatError(
                f"{path}: segment {seg} lists {total} ids, expected {count}"
            )
        tables.append(_table_from_entries(entries, width))
    if offset != len(raw):
        raise IndexFormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return SubcodeInvertedIndex(layout, groups, tables, dataset, digest)


def _table_from_entries(entries, width):
    if width <= _DENSE_WIDTH_LIMIT:
        starts = np.zeros((1 << width) + 1, dtype=np.int64)
        for value, ids in entries:
            starts[value + 1] = len(ids)
        np.cumsum(starts, out=starts)
        ids_all = (np.concatenate([ids for _, ids in entries])
                   if entries else _EMPTY_IDS)
        return starts, ids_all
    return {value: ids for value, ids in entries}
