"""Search orchestrator: four strategies behind one interface.

All strategies return exactly the same neighbor sets; they differ only in
how much work they do to get there. The engine is immutable once built,
so any number of searches may run concurrently.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import BinaryCode, SubCodeLayout, hamming_distances_packed
from .errors import EngineNotReadyError
from .store import CodeDataset
from .subcode import SubcodeInvertedIndex, build_index, candidates, filtered_search
from .term_match import PositionPostings, build_position_postings, term_match_search


class SearchStrategy(str, Enum):
    TERM_MATCH = "term_match"
    BIT_OP_SCAN = "bit_op_scan"
    FILTERED = "filtered"
    FILTERED_PERMUTED = "filtered_permuted"


ALL_STRATEGIES = tuple(SearchStrategy)


@dataclass(frozen=True)
class SearchResult:
    """Neighbors sorted by (distance, id), plus instrumentation."""

    neighbors: list
    candidate_count: int
    elapsed_us: float


class SearchEngine:
    """Dataset plus whatever auxiliary structures its strategies need.

    Build the pieces you want up front (they can be large) and hand them
    in; a strategy whose component is missing raises
    :class:`EngineNotReadyError` at query time.
    """

    def __init__(self, dataset: CodeDataset, *,
                 term_postings: PositionPostings | None = None,
                 plain_index: SubcodeInvertedIndex | None = None,
                 permuted_index: SubcodeInvertedIndex | None = None,
                 permutation=None):
        self.dataset = dataset
        self.term_postings = term_postings
        self.plain_index = plain_index
        self.permuted_index = permuted_index
        self.permutation = permutation

    @classmethod
    def build(cls, dataset: CodeDataset, *, filter_layout: SubCodeLayout | None = None,
              permutation=None, strategies=ALL_STRATEGIES) -> "SearchEngine":
        """Construct every component the requested strategies need."""
        strategies = set(SearchStrategy(s) for s in strategies)
        postings = None
        plain = None
        permuted = None
        if SearchStrategy.TERM_MATCH in strategies:
            postings = build_position_postings(dataset)
        if SearchStrategy.FILTERED in strategies:
            if filter_layout is None:
                raise ValueError("filtered strategy needs a filter layout")
            plain = build_index(dataset, filter_layout)
        if SearchStrategy.FILTERED_PERMUTED in strategies:
            if filter_layout is None or permutation is None:
                raise ValueError(
                    "filtered_permuted strategy needs a filter layout and permutation"
                )
            permuted = build_index(dataset, filter_layout, permutation)
        return cls(dataset, term_postings=postings, plain_index=plain,
                   permuted_index=permuted, permutation=permutation)

    # -- helpers -------------------------------------------------------------

    @property
    def nbits(self) -> int:
        return self.dataset.nbits

    def available_strategies(self) -> list:
        out = [SearchStrategy.BIT_OP_SCAN]
        if self.term_postings is not None:
            out.insert(0, SearchStrategy.TERM_MATCH)
        if self.plain_index is not None:
            out.append(SearchStrategy.FILTERED)
        if self.permuted_index is not None:
            out.append(SearchStrategy.FILTERED_PERMUTED)
        return out

    def _index_for(self, strategy: SearchStrategy) -> SubcodeInvertedIndex:
        idx = (self.plain_index if strategy is SearchStrategy.FILTERED
               else self.permuted_index)
        if idx is None:
            raise EngineNotReadyError(
                f"engine was built without the {strategy.value} component"
            )
        return idx

    def _check_query(self, query: BinaryCode) -> None:
        if query.nbits != self.nbits:
            raise ValueError(
                f"query has {query.nbits} bits, engine codes have {self.nbits}"
            )

    # -- r-neighbor search -----------------------------------------------------

    def r_neighbor_search(self, strategy, query: BinaryCode, radius: int
                          ) -> SearchResult:
        """Exactly the ids (with distances) within ``radius`` of ``query``."""
        strategy = SearchStrategy(strategy)
        self._check_query(query)
        if not 0 <= radius <= self.nbits:
            raise ValueError(f"radius {radius} outside [0, {self.nbits}]")
        start = time.perf_counter_ns()
        if strategy is SearchStrategy.BIT_OP_SCAN:
            dists = hamming_distances_packed(self.dataset.words, query.to_row())
            ids = np.flatnonzero(dists <= radius)
            ids, dists, cand = ids, dists[ids], len(self.dataset)
        elif strategy is SearchStrategy.TERM_MATCH:
            if self.term_postings is None:
                raise EngineNotReadyError(
                    "engine was built without term-match postings"
                )
            ids, dists = term_match_search(self.term_postings, query, radius)
            cand = len(self.dataset)
        else:
            ids, dists, cand = filtered_search(self._index_for(strategy), query, radius)
        order = np.lexsort((ids, dists))
        neighbors = [(int(ids[k]), int(dists[k])) for k in order]
        elapsed_us = (time.perf_counter_ns() - start) / 1000.0
        return SearchResult(neighbors=neighbors, candidate_count=cand,
                            elapsed_us=elapsed_us)

    # -- k-nearest neighbors ---------------------------------------------------

    def knn_search(self, strategy, query: BinaryCode, k: int) -> SearchResult:
        """The k nearest codes, growing the radius one step at a time.

        Ties at the cutoff distance break by ascending id. Distances
        verified at one radius are cached, so widening the radius never
        recomputes them.
        """
        strategy = SearchStrategy(strategy)
        self._check_query(query)
        if k < 1:
            raise ValueError("k must be at least 1")
        start = time.perf_counter_ns()
        n = len(self.dataset)
        if strategy in (SearchStrategy.BIT_OP_SCAN, SearchStrategy.TERM_MATCH):
            ids, dists, cand = self._scan_all(strategy, query)
            counts = np.bincount(dists, minlength=self.nbits + 1).cumsum()
            radius = 0
            while counts[radius] < k and radius < self.nbits:
                radius += 1
        else:
            idx = self._index_for(strategy)
            seen = np.zeros(n, dtype=bool)
            id_parts, dist_parts = [], []
            counts = np.zeros(self.nbits + 1, dtype=np.int64)
            seg_count = idx.layout.segment_count
            radius, last_ball = 0, -1
            while True:
                ball = radius // seg_count
                if ball != last_ball:
                    cand_ids = candidates(idx, query, radius)
                    fresh = cand_ids[~seen[cand_ids]]
                    seen[fresh] = True
                    if fresh.size:
                        fd = hamming_distances_packed(
                            self.dataset.words[fresh], query.to_row()
                        )
                        id_parts.append(fresh.astype(np.int64))
                        dist_parts.append(fd)
                        counts += np.bincount(
                            fd, minlength=self.nbits + 1
                        ).cumsum()
                    last_ball = ball
                if counts[radius] >= k or radius == self.nbits:
                    break
                radius += 1
            ids = np.concatenate(id_parts) if id_parts else np.empty(0, np.int64)
            dists = (np.concatenate(dist_parts) if dist_parts
                     else np.empty(0, np.int32))
            cand = int(ids.size)
        within = dists <= radius
        ids, dists = ids[within], dists[within]
        order = np.lexsort((ids, dists))[:k]
        neighbors = [(int(ids[t]), int(dists[t])) for t in order]
        elapsed_us = (time.perf_counter_ns() - start) / 1000.0
        return SearchResult(neighbors=neighbors, candidate_count=cand,
                            elapsed_us=elapsed_us)

    def _scan_all(self, strategy, query):
        if strategy is SearchStrategy.BIT_OP_SCAN:
            dists = hamming_distances_packed(self.dataset.words, query.to_row())
            return np.arange(len(self.dataset), dtype=np.int64), dists, len(self.dataset)
        if self.term_postings is None:
            raise EngineNotReadyError("engine was built without term-match postings")
        ids, dists = term_match_search(self.term_postings, query, self.nbits)
        return ids, dists, len(self.dataset)


def result_to_document(result: SearchResult) -> dict:
    """JSON-ready form shared by the CLI and the HTTP service."""
    return {
        "neighbors": [{"id": i, "distance": d} for i, d in result.neighbors],
        "candidate_count": result.candidate_count,
        "elapsed_us": result.elapsed_us,
    }
