import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamsearch.core import (
    BinaryCode,
    SubCodeLayout,
    hakmem_popcount64,
    hamming_distance,
    hamming_distances_packed,
    pack_rows,
    popcount64,
    popcount_words,
    segment,
    unpack_rows,
    word_count,
)


def naive_popcount(u: int) -> int:
    """Shift-and-count loop; the independent oracle for both popcounts."""
    count = 0
    while u:
        count += u & 1
        u >>= 1
    return count


def bitwise_distance(x: int, y: int, nbits: int) -> int:
    """Per-bit comparison oracle, no popcount involved."""
    return sum(((x >> i) & 1) != ((y >> i) & 1) for i in range(nbits))


CODE_LENGTHS = [1, 7, 8, 63, 64, 65, 100, 128, 256]


@st.composite
def code_pairs(draw, count=2):
    nbits = draw(st.sampled_from(CODE_LENGTHS))
    values = [draw(st.integers(0, (1 << nbits) - 1)) for _ in range(count)]
    return nbits, [BinaryCode.from_int(v, nbits) for v in values], values


class TestHakmemPopcount:
    def test_zero(self):
        assert hakmem_popcount64(0) == 0

    def test_all_ones(self):
        assert hakmem_popcount64(0xFFFFFFFFFFFFFFFF) == 64

    def test_single_bits(self):
        for b in range(64):
            assert hakmem_popcount64(1 << b) == 1

    def test_near_full_counts(self):
        # 63 and 64 set bits are exactly where a mod-63 fold goes wrong
        for b in range(64):
            assert hakmem_popcount64(0xFFFFFFFFFFFFFFFF ^ (1 << b)) == 63

    def test_exhaustive_16bit(self):
        values = np.arange(1 << 16, dtype=np.uint64)
        got = hakmem_popcount64(values)
        expected = np.zeros(1 << 16, dtype=np.uint64)
        shifted = values.copy()
        for _ in range(64):
            expected += shifted & np.uint64(1)
            shifted >>= np.uint64(1)
        assert np.array_equal(got, expected)

    def test_random_words_match_naive_loop(self):
        rng = np.random.default_rng(7)
        words = rng.integers(0, 1 << 64, size=2000, dtype=np.uint64)
        for w in words[:200]:
            assert hakmem_popcount64(int(w)) == naive_popcount(int(w))
        got = hakmem_popcount64(words)
        assert np.array_equal(got, np.bitwise_count(words))

    def test_matches_native_popcount(self):
        rng = np.random.default_rng(3)
        for w in rng.integers(0, 1 << 64, size=500, dtype=np.uint64):
            assert hakmem_popcount64(int(w)) == popcount64(int(w))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            hakmem_popcount64(-1)
        with pytest.raises(ValueError):
            hakmem_popcount64(1 << 64)
        with pytest.raises(ValueError):
            hakmem_popcount64(np.arange(4, dtype=np.int32))


class TestBinaryCode:
    def test_from_int_round_trip(self):
        code = BinaryCode.from_int(0xDEADBEEF, 100)
        assert code.to_int() == 0xDEADBEEF
        assert len(code.words) == 2

    def test_bit_access(self):
        code = BinaryCode.from_int(0b1010, 4)
        assert [code.bit(i) for i in range(4)] == [0, 1, 0, 1]

    def test_rejects_wrong_word_count(self):
        with pytest.raises(ValueError):
            BinaryCode((1, 2), 64)

    def test_rejects_dirty_high_bits(self):
        with pytest.raises(ValueError):
            BinaryCode((1 << 10,), 10)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(ValueError):
            BinaryCode((), 0)

    def test_value_must_fit(self):
        with pytest.raises(ValueError):
            BinaryCode.from_int(16, 4)


class TestHammingDistance:
    def test_hand_computed(self):
        a = BinaryCode.from_int(0b1010, 4)
        b = BinaryCode.from_int(0b0110, 4)
        assert hamming_distance(a, b) == 2

    def test_length_mismatch(self):
        a = BinaryCode.from_int(0, 8)
        b = BinaryCode.from_int(0, 16)
        with pytest.raises(ValueError):
            hamming_distance(a, b)

    @given(code_pairs())
    def test_identity_and_symmetry(self, drawn):
        nbits, (a, b), (va, vb) = drawn
        assert hamming_distance(a, a) == 0
        assert hamming_distance(a, b) == hamming_distance(b, a)
        assert (hamming_distance(a, b) == 0) == (va == vb)

    @given(code_pairs(count=3))
    def test_triangle_inequality(self, drawn):
        _, (a, b, c), _ = drawn
        assert hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c)

    @given(code_pairs())
    def test_matches_per_bit_oracle(self, drawn):
        nbits, (a, b), (va, vb) = drawn
        assert hamming_distance(a, b) == bitwise_distance(va, vb, nbits)

    @given(code_pairs())
    def test_equals_word_xor_popcounts(self, drawn):
        _, (a, b), _ = drawn
        total = sum(popcount64(x ^ y) for x, y in zip(a.words, b.words))
        assert hamming_distance(a, b) == total

    def test_random_128bit_pairs_against_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            va = int.from_bytes(rng.bytes(16), "little")
            vb = int.from_bytes(rng.bytes(16), "little")
            a = BinaryCode.from_int(va, 128)
            b = BinaryCode.from_int(vb, 128)
            assert hamming_distance(a, b) == bitwise_distance(va, vb, 128)


class TestPackedDistances:
    def test_matches_scalar_distance(self):
        rng = np.random.default_rng(5)
        nbits = 128
        words = rng.integers(0, 1 << 64, size=(50, 2), dtype=np.uint64)
        q = BinaryCode.from_row(words[17], nbits)
        dists = hamming_distances_packed(words, q.to_row())
        for i in range(50):
            assert dists[i] == hamming_distance(BinaryCode.from_row(words[i], nbits), q)

    def test_popcount_words_is_native(self):
        rng = np.random.default_rng(9)
        words = rng.integers(0, 1 << 64, size=1000, dtype=np.uint64)
        assert np.array_equal(popcount_words(words), np.bitwise_count(words))


class TestSubCodeLayout:
    def test_divisible(self):
        layout = SubCodeLayout.with_width(128, 16)
        assert layout.segment_count == 8
        assert layout.widths() == [16] * 8

    def test_short_last_segment(self):
        layout = SubCodeLayout.with_width(100, 16)
        assert layout.segment_count == 7
        assert layout.widths() == [16] * 6 + [4]
        assert sum(layout.widths()) == 100

    def test_with_segment_count(self):
        layout = SubCodeLayout.with_segment_count(128, 8)
        assert layout.segment_width == 16

    def test_ranges_partition(self):
        layout = SubCodeLayout.with_width(100, 13)
        covered = []
        for i in range(layout.segment_count):
            start, stop = layout.bit_range(i)
            covered.extend(range(start, stop))
        assert covered == list(range(100))

    def test_rejects_impossible_partition(self):
        with pytest.raises(ValueError):
            SubCodeLayout(9, 4, 3)

    def test_segment_labels(self):
        layout = SubCodeLayout.with_width(8, 4)
        assert list(layout.segment_labels()) == [0, 0, 0, 0, 1, 1, 1, 1]


class TestSegment:
    def test_word_aligned_split(self):
        rng = np.random.default_rng(1)
        words = (int(rng.integers(0, 1 << 63)), int(rng.integers(0, 1 << 63)))
        code = BinaryCode(words, 128)
        layout = SubCodeLayout.with_width(128, 64)
        assert segment(code, layout) == list(words)

    def test_hand_computed(self):
        code = BinaryCode.from_int(0b1111_0000, 8)
        layout = SubCodeLayout.with_width(8, 4)
        assert segment(code, layout) == [0b0000, 0b1111]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            segment(BinaryCode.from_int(0, 8), SubCodeLayout.with_width(16, 8))

    @given(code_pairs(), st.sampled_from([3, 5, 8, 16, 64]))
    def test_distance_decomposes_over_segments(self, drawn, width):
        nbits, (a, b), _ = drawn
        layout = SubCodeLayout.with_width(nbits, width)
        seg_a = segment(a, layout)
        seg_b = segment(b, layout)
        per_segment = [
            bitwise_distance(x, y, w)
            for x, y, w in zip(seg_a, seg_b, layout.widths())
        ]
        assert sum(per_segment) == hamming_distance(a, b)

    @given(code_pairs(count=1))
    def test_concatenation_reconstructs(self, drawn):
        nbits, (code,), (value,) = drawn
        layout = SubCodeLayout.with_width(nbits, 7)
        rebuilt = 0
        offset = 0
        for part, width in zip(segment(code, layout), layout.widths()):
            rebuilt |= part << offset
            offset += width
        assert rebuilt == value


class TestPackUnpack:
    @given(st.integers(1, 200), st.integers(0, 2**32))
    def test_round_trip(self, nbits, seed):
        rng = np.random.default_rng(seed)
        bits = rng.integers(0, 2, size=(13, nbits), dtype=np.uint8)
        words = pack_rows(bits, nbits)
        assert words.shape == (13, word_count(nbits))
        assert np.array_equal(unpack_rows(words, nbits), bits)

    def test_bit_order_is_lsb_first(self):
        code = BinaryCode.from_int(0b01, 2)
        bits = unpack_rows(code.to_row().reshape(1, -1), 2)
        assert list(bits[0]) == [1, 0]
