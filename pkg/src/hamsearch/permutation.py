"""Bit-permutation preprocessing to decorrelate filter segments.

Filtering works best when the bits inside one segment are statistically
independent, and Hamming distance does not care about bit order. So we
estimate the absolute pairwise bit correlations, score a permutation by
the total correlation mass that lands inside segments, and shrink that
score with Kernighan-Lin style swaps: repeatedly exchange the mappings of
two positions in different segments when doing so lowers the objective.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .core import SubCodeLayout, pack_rows, unpack_rows
from .errors import InsufficientDataError
from .store import CodeDataset

logger = logging.getLogger(__name__)

SWAP_GAIN_TOLERANCE = 1e-12
MAX_PASSES = 100
DEFAULT_SAMPLE_LIMIT = 100_000


@dataclass(frozen=True)
class Permutation:
    """Bijection on bit positions; permuted bit p is original bit mapping[p]."""

    mapping: np.ndarray

    def __post_init__(self):
        mapping = np.ascontiguousarray(self.mapping, dtype=np.int32)
        if mapping.ndim != 1 or not np.array_equal(
            np.sort(mapping), np.arange(len(mapping), dtype=np.int32)
        ):
            raise ValueError("mapping must be a bijection on [0, nbits)")
        mapping.setflags(write=False)
        object.__setattr__(self, "mapping", mapping)

    @property
    def nbits(self) -> int:
        return len(self.mapping)

    @classmethod
    def identity(cls, nbits: int) -> "Permutation":
        return cls(np.arange(nbits, dtype=np.int32))

    def inverse(self) -> "Permutation":
        inv = np.empty(self.nbits, dtype=np.int32)
        inv[self.mapping] = np.arange(self.nbits, dtype=np.int32)
        return Permutation(inv)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.mapping, np.arange(self.nbits)))

    def canonical_text(self) -> str:
        return f"m={self.nbits}\n" + " ".join(str(int(p)) for p in self.mapping) + "\n"

    def digest(self) -> int:
        """64-bit content digest, stored in index headers to pin the pairing."""
        h = hashlib.sha256(self.canonical_text().encode("ascii")).digest()
        return int.from_bytes(h[:8], "little")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.mapping, other.mapping)


def save_permutation(perm: Permutation, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(perm.canonical_text())


def load_permutation(path) -> Permutation:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("m="):
        raise ValueError(f"{path}: expected 'm=<bits>' then the mapping")
    nbits = int(lines[0][2:])
    mapping = np.array([int(tok) for tok in lines[1].split()], dtype=np.int32)
    if len(mapping) != nbits:
        raise ValueError(f"{path}: mapping length {len(mapping)} != m={nbits}")
    return Permutation(mapping)


def estimate_correlations(ds: CodeDataset, *, sample_limit: int = DEFAULT_SAMPLE_LIMIT,
                          seed: int = 0) -> np.ndarray:
    """Absolute Pearson correlation between every pair of bit columns.

    Subsamples to ``sample_limit`` codes (seeded) when the dataset is
    larger. Constant columns have no defined correlation; their rows and
    columns (including the diagonal) are set to zero with a warning.
    """
    n = len(ds)
    if n < 2:
        raise InsufficientDataError("need at least 2 codes to correlate bits")
    if n > sample_limit:
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(n, size=sample_limit, replace=False))
        words = ds.words[rows]
    else:
        words = ds.words
    bits = unpack_rows(words, ds.nbits).astype(np.float64)
    constant = bits.std(axis=0) == 0.0
    if constant.any():
        logger.warning(
            "%d constant bit column(s) have undefined correlation; using 0",
            int(constant.sum()),
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(bits, rowvar=False)
    corr = np.abs(np.nan_to_num(corr, nan=0.0))
    corr = np.clip((corr + corr.T) / 2.0, 0.0, 1.0)
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    return corr


def objective(corr: np.ndarray, perm: Permutation, layout: SubCodeLayout) -> float:
    """Total correlation mass inside segments under ``perm``.

    Sum of ``corr[perm[p], perm[q]]`` over all position pairs (p, q) that
    share a segment, diagonal included.
    """
    m = layout.nbits
    if corr.shape != (m, m):
        raise ValueError(f"correlation matrix must be {m}x{m}, got {corr.shape}")
    if perm.nbits != m:
        raise ValueError(f"permutation length {perm.nbits} != {m}")
    total = 0.0
    for i in range(layout.segment_count):
        start, stop = layout.bit_range(i)
        idx = perm.mapping[start:stop]
        total += float(corr[np.ix_(idx, idx)].sum())
    return total


def kernighan_lin(corr: np.ndarray, layout: SubCodeLayout, seed=None) -> Permutation:
    """Minimize :func:`objective` by steepest-descent position swaps.

    Each pass scores every cross-segment position pair and applies the
    best strictly-improving swap; stops when no swap gains more than
    ``SWAP_GAIN_TOLERANCE`` or after ``MAX_PASSES`` passes. Ties go to the
    lowest pair index, or to a seeded random choice when ``seed`` is set,
    so runs are reproducible either way.
    """
    m = layout.nbits
    if corr.shape != (m, m):
        raise ValueError(f"correlation matrix must be {m}x{m}, got {corr.shape}")
    labels = layout.segment_labels()
    seg_starts = np.array(
        [layout.bit_range(i)[0] for i in range(layout.segment_count)], dtype=np.int64
    )
    pos = np.arange(m)
    cross = (labels[:, None] != labels[None, :]) & (pos[:, None] < pos[None, :])
    pair_i, pair_j = np.nonzero(cross)
    mapping = np.arange(m, dtype=np.int32)
    rng = np.random.default_rng(seed) if seed is not None else None
    if pair_i.size == 0:
        return Permutation(mapping)
    diag = np.diagonal(corr)
    for _ in range(MAX_PASSES):
        # seg_sums[b, S] = sum of corr[b, bit] over bits currently in segment S
        seg_sums = np.add.reduceat(corr[:, mapping], seg_starts, axis=1)
        a = mapping[pair_i]
        b = mapping[pair_j]
        seg_a = labels[pair_i]
        seg_b = labels[pair_j]
        delta = (
            2.0 * (seg_sums[b, seg_a] - seg_sums[a, seg_a]
                   + seg_sums[a, seg_b] - seg_sums[b, seg_b])
            - 4.0 * corr[a, b]
            + 2.0 * diag[a]
            + 2.0 * diag[b]
        )
        gains = -delta
        best = gains.max()
        if best <= SWAP_GAIN_TOLERANCE:
            break
        tied = np.flatnonzero(gains == best)
        pick = tied[0] if rng is None or len(tied) == 1 else tied[rng.integers(len(tied))]
        i, j = pair_i[pick], pair_j[pick]
        mapping[i], mapping[j] = mapping[j], mapping[i]
    return Permutation(mapping)


def apply_permutation(ds: CodeDataset, perm: Permutation, chunk: int = 1 << 16
                      ) -> CodeDataset:
    """Reorder every code's bits; pairwise distances are preserved exactly."""
    if perm.nbits != ds.nbits:
        raise ValueError(f"permutation length {perm.nbits} != code length {ds.nbits}")
    out = np.empty_like(ds.words)
    for lo in range(0, len(ds), chunk):
        hi = min(lo + chunk, len(ds))
        bits = unpack_rows(ds.words[lo:hi], ds.nbits)
        out[lo:hi] = pack_rows(bits[:, perm.mapping], ds.nbits)
    return CodeDataset(out, ds.nbits)
