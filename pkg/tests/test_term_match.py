import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamsearch.core import BinaryCode, hamming_distance
from hamsearch.store import CodeDataset
from hamsearch.term_match import build_position_postings, term_match_search
from tests.test_store import random_dataset


def brute_force_neighbors(ds, query, radius):
    out = set()
    for i in range(len(ds)):
        d = hamming_distance(ds.code(i), query)
        if d <= radius:
            out.add((i, d))
    return out


def search_set(pp, query, radius):
    ids, dists = term_match_search(pp, query, radius)
    return {(int(i), int(d)) for i, d in zip(ids, dists)}


class TestBuildPostings:
    def test_hand_built(self):
        words = np.array([[0b01], [0b10]], dtype=np.uint64)
        pp = build_position_postings(CodeDataset(words, 2))
        assert list(pp.ones[0]) == [0]
        assert list(pp.ones[1]) == [1]
        assert list(pp.zeros[0]) == [1]
        assert list(pp.zeros[1]) == [0]

    def test_all_zeros_dataset(self):
        ds = CodeDataset(np.zeros((4, 1), dtype=np.uint64), 16)
        pp = build_position_postings(ds)
        assert all(len(arr) == 0 for arr in pp.ones)
        assert all(list(arr) == [0, 1, 2, 3] for arr in pp.zeros)

    @given(st.integers(0, 999))
    def test_partition_per_position(self, seed):
        ds = random_dataset(37, 24, seed)
        pp = build_position_postings(ds)
        everyone = set(range(len(ds)))
        for p in range(ds.nbits):
            ones = set(int(i) for i in pp.ones[p])
            zeros = set(int(i) for i in pp.zeros[p])
            assert ones | zeros == everyone
            assert not (ones & zeros)
            # direct re-scan oracle
            for i in range(len(ds)):
                expected_in_ones = ds.code(i).bit(p) == 1
                assert (i in ones) == expected_in_ones
            assert list(pp.ones[p]) == sorted(ones)


class TestTermMatchSearch:
    def test_query_in_dataset_radius_zero(self):
        ds = random_dataset(30, 32, seed=1)
        pp = build_position_postings(ds)
        q = ds.code(11)
        got = search_set(pp, q, 0)
        assert (11, 0) in got
        assert got == brute_force_neighbors(ds, q, 0)

    def test_complement_found_at_full_radius(self):
        ds = random_dataset(10, 16, seed=2)
        pp = build_position_postings(ds)
        complement = BinaryCode.from_int(ds.code(4).to_int() ^ 0xFFFF, 16)
        got = search_set(pp, complement, 16)
        assert (4, 16) in got

    def test_radius_out_of_range(self):
        ds = random_dataset(5, 16, seed=3)
        pp = build_position_postings(ds)
        with pytest.raises(ValueError):
            term_match_search(pp, ds.code(0), 17)
        with pytest.raises(ValueError):
            term_match_search(pp, ds.code(0), -1)

    def test_length_mismatch(self):
        ds = random_dataset(5, 16, seed=3)
        pp = build_position_postings(ds)
        with pytest.raises(ValueError):
            term_match_search(pp, BinaryCode.from_int(0, 8), 1)

    @pytest.mark.parametrize("radius", [5, 10])
    def test_equals_linear_scan_oracle(self, radius):
        ds = random_dataset(200, 64, seed=4)
        pp = build_position_postings(ds)
        rng = np.random.default_rng(99)
        for _ in range(25):
            q = BinaryCode.from_int(int(rng.integers(0, 1 << 63)) * 2
                                    + int(rng.integers(0, 2)), 64)
            assert search_set(pp, q, radius) == brute_force_neighbors(ds, q, radius)

    def test_wide_codes_do_not_overflow_counts(self):
        ds = random_dataset(20, 256, seed=6)
        pp = build_position_postings(ds)
        q = ds.code(0)
        got = search_set(pp, q, 256)
        assert len(got) == 20
        assert (0, 0) in got
