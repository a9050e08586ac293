"""Dataset container plus the on-disk code formats.

The binary carrier (FBIN) is a fixed-stride record file:

    magic   4 bytes  b"FBIN"
    version u16 LE   (currently 1)
    nbits   u32 LE   bits per code
    count   u64 LE   number of codes
    payload count records of ceil(nbits/64) u64 LE words each

A small text format (first line ``m=<int>``, then one hex code per line)
exists for hand-written fixtures.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .core import BinaryCode, word_count
from .errors import (
    DatasetCorruptError,
    DatasetFormatError,
    EmptyDatasetError,
    HexCodeError,
)

FBIN_MAGIC = b"FBIN"
FBIN_VERSION = 1
_HEADER = struct.Struct("<4sHIQ")


class CodeDataset:
    """Immutable collection of equal-length codes with dense ids 0..n-1."""

    def __init__(self, words: np.ndarray, nbits: int):
        if nbits <= 0:
            raise EmptyDatasetError("code length must be positive")
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.ndim != 2:
            raise ValueError("expected a 2-D (n, words) array")
        if words.shape[0] == 0:
            raise EmptyDatasetError("dataset contains no codes")
        if words.shape[1] != word_count(nbits):
            raise ValueError(
                f"need {word_count(nbits)} words per code for {nbits} bits, "
                f"got {words.shape[1]}"
            )
        spare = nbits % 64
        if spare and (words[:, -1] >> np.uint64(spare)).any():
            raise ValueError("unused high bits of the last word must be zero")
        words.setflags(write=False)
        self._words = words
        self.nbits = nbits

    @property
    def words(self) -> np.ndarray:
        return self._words

    def __len__(self) -> int:
        return self._words.shape[0]

    def code(self, i: int) -> BinaryCode:
        return BinaryCode.from_row(self._words[i], self.nbits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CodeDataset):
            return NotImplemented
        return self.nbits == other.nbits and np.array_equal(self._words, other._words)

    def __repr__(self) -> str:
        return f"CodeDataset(n={len(self)}, nbits={self.nbits})"


def save_dataset(ds: CodeDataset, path) -> None:
    """Write ``ds`` to ``path`` in FBIN format, fsync-complete."""
    header = _HEADER.pack(FBIN_MAGIC, FBIN_VERSION, ds.nbits, len(ds))
    payload = np.ascontiguousarray(ds.words, dtype="<u8").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise OSError(f"writing dataset to {path}: {exc}") from exc


def load_dataset(path) -> CodeDataset:
    """Read an FBIN file back into a :class:`CodeDataset`."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"reading dataset from {path}: {exc}") from exc
    if len(raw) < _HEADER.size or raw[:4] != FBIN_MAGIC:
        raise DatasetFormatError(f"{path}: not an FBIN file (bad magic)")
    magic, version, nbits, count = _HEADER.unpack_from(raw)
    if version != FBIN_VERSION:
        raise DatasetFormatError(f"{path}: unsupported FBIN version {version}")
    if nbits == 0 or count == 0:
        raise EmptyDatasetError(f"{path}: empty dataset (n={count}, m={nbits})")
    nwords = word_count(nbits)
    expected = _HEADER.size + count * nwords * 8
    if len(raw) != expected:
        raise DatasetCorruptError(
            f"{path}: payload is {len(raw) - _HEADER.size} bytes, "
            f"expected {expected - _HEADER.size}"
        )
    words = np.frombuffer(raw, dtype="<u8", offset=_HEADER.size)
    words = words.reshape(count, nwords).astype(np.uint64)
    try:
        return CodeDataset(words, nbits)
    except ValueError as exc:
        raise DatasetCorruptError(f"{path}: {exc}") from exc


def hex_digits(nbits: int) -> int:
    return (nbits + 3) // 4


def format_code_hex(code: BinaryCode) -> str:
    """Hex rendering; the first digit holds the highest-numbered bits."""
    return format(code.to_int(), f"0{hex_digits(code.nbits)}x")


def parse_code_hex(text: str, nbits: int) -> BinaryCode:
    """Inverse of :func:`format_code_hex`."""
    if nbits <= 0:
        raise ValueError("code length must be positive")
    want = hex_digits(nbits)
    if len(text) != want:
        raise HexCodeError(
            f"expected {want} hex digits for a {nbits}-bit code, got {len(text)}"
        )
    try:
        value = int(text, 16)
    except ValueError:
        raise HexCodeError(f"not a hex string: {text!r}") from None
    if value >> nbits:
        raise HexCodeError(f"{text!r} has bits above position {nbits - 1}")
    return BinaryCode.from_int(value, nbits)


def save_hex_dataset(ds: CodeDataset, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"m={ds.nbits}\n")
        for i in range(len(ds)):
            fh.write(format_code_hex(ds.code(i)) + "\n")


def load_hex_dataset(path) -> CodeDataset:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("m="):
        raise DatasetFormatError(f"{path}: first line must be 'm=<bits>'")
    try:
        nbits = int(lines[0][2:])
    except ValueError:
        raise DatasetFormatError(f"{path}: bad bit count {lines[0][2:]!r}") from None
    codes = [parse_code_hex(line.strip(), nbits) for line in lines[1:] if line.strip()]
    if nbits <= 0 or not codes:
        raise EmptyDatasetError(f"{path}: empty dataset")
    words = np.array([c.words for c in codes], dtype=np.uint64)
    return CodeDataset(words, nbits)


def read_codes(path) -> CodeDataset:
    """Load either format, sniffing the FBIN magic first."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == FBIN_MAGIC:
        return load_dataset(path)
    return load_hex_dataset(path)
