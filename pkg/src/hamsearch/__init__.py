"""Exact nearest-neighbor search for binary codes in Hamming space."""

from .core import (
    BinaryCode,
    SubCodeLayout,
    hakmem_popcount64,
    hamming_distance,
    hamming_distances_packed,
    popcount64,
    popcount_words,
    segment,
)
from .engine import SearchEngine, SearchResult, SearchStrategy
from .permutation import (
    Permutation,
    apply_permutation,
    estimate_correlations,
    kernighan_lin,
    load_permutation,
    objective,
    save_permutation,
)
from .store import (
    CodeDataset,
    format_code_hex,
    load_dataset,
    parse_code_hex,
    read_codes,
    save_dataset,
)
from .subcode import (
    SubcodeInvertedIndex,
    build_index,
    candidates,
    enumerate_ball,
    filtered_search,
    load_index,
    save_index,
)
from .term_match import PositionPostings, build_position_postings, term_match_search

__version__ = "0.1.0"

__all__ = [
    "BinaryCode",
    "CodeDataset",
    "Permutation",
    "PositionPostings",
    "SearchEngine",
    "SearchResult",
    "SearchStrategy",
    "SubCodeLayout",
    "SubcodeInvertedIndex",
    "apply_permutation",
    "build_index",
    "build_position_postings",
    "candidates",
    "enumerate_ball",
    "estimate_correlations",
    "filtered_search",
    "format_code_hex",
    "hakmem_popcount64",
    "hamming_distance",
    "hamming_distances_packed",
    "kernighan_lin",
    "load_dataset",
    "load_index",
    "load_permutation",
    "objective",
    "parse_code_hex",
    "popcount64",
    "popcount_words",
    "read_codes",
    "save_dataset",
    "save_index",
    "save_permutation",
    "segment",
    "term_match_search",
]
