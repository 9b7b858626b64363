"""Matrix representations, the CSC codec, storage footprints and tiling.

Dense matrices are row-major integer arrays; CSC matrices keep the nonzero
values in column-major scan order with per-value row indices and ``cols + 1``
column pointers. Every object here is immutable once built.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator, Sequence

import numpy as np

from .errors import CscFormatError, MalformedCsc, RowIndexOverflow

DENSE = "dense"
CSC = "csc"
FORMATS = (DENSE, CSC)


@dataclass(frozen=True)
class BitWidths:
    value_bits: int = 16
    index_bits: int = 8
    pointer_bits: int = 16
    psum_bits: int = 48

    def __post_init__(self):
        for name in ("value_bits", "index_bits", "pointer_bits", "psum_bits"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def csc_element_bits(self) -> int:
        return self.value_bits + self.index_bits

    def check_psum_headroom(self, contraction: int) -> None:
        need = 2 * self.value_bits + math.ceil(math.log2(max(contraction, 1)))
        if self.psum_bits < need:
            raise ValueError(
                f"psum_bits={self.psum_bits} too narrow for contraction length "
                f"{contraction} (needs {need})"
            )


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.int64, copy=True)
    a.setflags(write=False)
    return a


def _signed_range(bits: int) -> tuple[int, int]:
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


@dataclass(frozen=True, eq=False)
class DenseMatrix:
    """Row-major matrix of signed ``value_bits`` integers."""

    data: np.ndarray
    value_bits: int = 16

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"dense matrix needs positive 2-D shape, got {a.shape}")
        if a.dtype.kind not in "iu":
            raise ValueError(f"dense matrix must hold integers, got {a.dtype}")
        a = _frozen(a)
        lo, hi = _signed_range(self.value_bits)
        if a.size and (a.min() < lo or a.max() > hi):
            raise ValueError(f"element outside signed {self.value_bits}-bit range")
        object.__setattr__(self, "data", a)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], value_bits: int = 16):
        return cls(np.array(rows, dtype=np.int64), value_bits)

    @classmethod
    def zeros(cls, rows: int, cols: int, value_bits: int = 16):
        return cls(np.zeros((rows, cols), dtype=np.int64), value_bits)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.data))

    @property
    def density(self) -> float:
        return self.nnz / self.data.size

    def tolist(self) -> list[list[int]]:
        return self.data.tolist()

    def __eq__(self, other):
        if not isinstance(other, DenseMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))


@dataclass(frozen=True, eq=False)
class CscMatrix:
    rows: int
    cols: int
    values: np.ndarray
    row_indices: np.ndarray
    col_pointers: np.ndarray
    bw: BitWidths = field(default_factory=BitWidths)

    def __post_init__(self):
        for name in ("values", "row_indices", "col_pointers"):
            object.__setattr__(self, name, _frozen(getattr(self, name)).reshape(-1))
        self.validate()

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise MalformedCsc(f"non-positive shape {self.rows}x{self.cols}")
        ptr, idx, val = self.col_pointers, self.row_indices, self.values
        if len(ptr) != self.cols + 1:
            raise MalformedCsc(f"expected {self.cols + 1} column pointers, got {len(ptr)}")
        if ptr[0] != 0:
            raise MalformedCsc("col_pointers[0] must be 0")
        if np.any(np.diff(ptr) < 0):
            raise MalformedCsc("col_pointers must be non-decreasing")
        if ptr[-1] != len(val) or len(val) != len(idx):
            raise MalformedCsc(
                f"pointer total {ptr[-1]} / values {len(val)} / indices {len(idx)} disagree"
            )
        if len(val) == 0:
            return
        if np.any(val == 0):
            raise MalformedCsc("explicit zero stored as a nonzero value")
        if idx.min() < 0 or idx.max() >= self.rows:
            raise MalformedCsc("row index out of range")
        if self.rows > (1 << self.bw.index_bits):
            raise MalformedCsc(f"{self.rows} rows exceed {self.bw.index_bits}-bit indices")
        lo, hi = _signed_range(self.bw.value_bits)
        if val.min() < lo or val.max() > hi:
            raise MalformedCsc(f"value outside signed {self.bw.value_bits}-bit range")
        # row indices strictly increase inside every column
        steps = np.diff(idx)
        col_start = np.zeros(len(idx), dtype=bool)
        col_start[ptr[:-1][ptr[:-1] < len(idx)]] = True
        if np.any(steps[~col_start[1:]] <= 0):
            raise MalformedCsc("row indices must strictly increase within a column")

    def __eq__(self, other):
        if not isinstance(other, CscMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.row_indices, other.row_indices)
            and np.array_equal(self.col_pointers, other.col_pointers)
        )

    def __hash__(self):
        return hash((self.shape, self.values.tobytes(), self.col_pointers.tobytes()))


@dataclass(frozen=True)
class TilePlanEntry:
    row_offset: int
    col_offset: int
    tile_rows: int
    tile_cols: int


def csc_encode(m: DenseMatrix, bw: BitWidths | None = None) -> CscMatrix:
    bw = bw or BitWidths(value_bits=m.value_bits)
    if m.rows > (1 << bw.index_bits):
        raise RowIndexOverflow(
            f"{m.rows} rows cannot be indexed with {bw.index_bits}-bit row indices"
        )
    # column-major scan: nonzero() on the transpose yields (col, row) sorted by col
    cols, rows = np.nonzero(m.data.T)
    values = m.data.T[cols, rows]
    counts = np.bincount(cols, minlength=m.cols)
    pointers = np.concatenate(([0], np.cumsum(counts)))
    return CscMatrix(m.rows, m.cols, values, rows, pointers, bw)


def csc_decode(c: CscMatrix) -> DenseMatrix:
    c.validate()
    out = np.zeros((c.rows, c.cols), dtype=np.int64)
    col_ids = np.repeat(np.arange(c.cols), np.diff(c.col_pointers))
    out[c.row_indices, col_ids] = c.values
    return DenseMatrix(out, c.bw.value_bits)


def csc_bits(nnz, cols: int, bw: BitWidths):
    return nnz * bw.csc_element_bits + (cols + 1) * bw.pointer_bits


def footprint_bits(m: DenseMatrix | CscMatrix, fmt: str, bw: BitWidths | None = None) -> int:
    bw = bw or BitWidths()
    rows, cols = m.shape
    if fmt == DENSE:
        return rows * cols * bw.value_bits
    if fmt == CSC:
        return csc_bits(m.nnz, cols, bw)
    raise ValueError(f"unknown format {fmt!r}")


def csc_crossover_density(rows: int, cols: int, bw: BitWidths | None = None) -> float:
    """Density at which CSC and dense storage of a rows x cols matrix cost the same."""
    bw = bw or BitWidths()
    dense = rows * cols * bw.value_bits
    return (dense - (cols + 1) * bw.pointer_bits) / (rows * cols * bw.csc_element_bits)


def tile(m: DenseMatrix | tuple[int, int], tile_rows: int, tile_cols: int) -> list[TilePlanEntry]:
    if tile_rows < 1 or tile_cols < 1:
        raise ValueError("tile dimensions must be positive")
    rows, cols = m if isinstance(m, tuple) else m.shape
    return [
        TilePlanEntry(r, c, min(tile_rows, rows - r), min(tile_cols, cols - c))
        for r in range(0, rows, tile_rows)
        for c in range(0, cols, tile_cols)
    ]


def extract(m: DenseMatrix, t: TilePlanEntry) -> DenseMatrix:
    block = m.data[t.row_offset:t.row_offset + t.tile_rows, t.col_offset:t.col_offset + t.tile_cols]
    return DenseMatrix(block, m.value_bits)


# -- seeded generation -------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_CHUNK = 1 << 22


def splitmix64(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the splitmix64 stream seeded with ``seed``.

    Counter-based: output i depends only on (seed, i), so any slice can be
    generated independently and the stream is identical on every platform.
    """
    with np.errstate(over="ignore"):
        i = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + i * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _uniform(z: np.ndarray) -> np.ndarray:
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _mask_chunks(rows: int, cols: int, density: float, seed: int) -> Iterator[tuple[int, np.ndarray]]:
    # element e uses stream draws 2e (keep/drop) and 2e+1 (value)
    total = rows * cols
    for start in range(0, total, _CHUNK):
        n = min(_CHUNK, total - start)
        z = splitmix64(seed, 2 * start, 2 * n)
        yield start, _uniform(z[0::2]) < density


def random_mask(rows: int, cols: int, density: float, seed: int) -> np.ndarray:
    """Boolean nonzero pattern of ``random_matrix(rows, cols, density, seed)``."""
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    out = np.empty(rows * cols, dtype=bool)
    for start, keep in _mask_chunks(rows, cols, density, seed):
        out[start:start + len(keep)] = keep
    return out.reshape(rows, cols)


def random_matrix(rows: int, cols: int, density: float, seed: int, value_bits: int = 16) -> DenseMatrix:
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    total = rows * cols
    z = splitmix64(seed, 0, 2 * total)
    keep = _uniform(z[0::2]) < density
    half = 1 << (value_bits - 1)
    span = np.uint64((1 << value_bits) - 1)  # signed range without zero
    v = (z[1::2] % span).astype(np.int64)
    v = np.where(v < half, v - half, v - half + 1)
    data = np.where(keep, v, 0).reshape(rows, cols)
    return DenseMatrix(data, value_bits)


# -- disk format -------------------------------------------------------------

MAGIC = b"CSCM"
VERSION = 1
_HEADER = struct.Struct("<4sHIIQBBBB")


def _pack(values: np.ndarray, width: int) -> bytes:
    if len(values) == 0:
        return b""
    u = values.astype(np.int64) & ((1 << width) - 1)
    bits = ((u[:, None] >> np.arange(width, dtype=np.int64)) & 1).astype(np.uint8)
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def _unpack(buf: bytes, count: int, width: int, signed: bool) -> np.ndarray:
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")
    bits = bits[: count * width].reshape(count, width).astype(np.int64)
    u = (bits << np.arange(width, dtype=np.int64)).sum(axis=1)
    if signed:
        u = np.where(u >= (1 << (width - 1)), u - (1 << width), u)
    return u


def _array_bytes(count: int, width: int) -> int:
    return (count * width + 7) // 8


def write_csc(c: CscMatrix, fh: BinaryIO) -> None:
    bw = c.bw
    if c.nnz >= (1 << bw.pointer_bits):
        raise MalformedCsc(f"{c.nnz} nonzeros overflow {bw.pointer_bits}-bit pointers")
    fh.write(_HEADER.pack(MAGIC, VERSION, c.rows, c.cols, c.nnz,
                          bw.value_bits, bw.index_bits, bw.pointer_bits, 0))
    fh.write(_pack(c.col_pointers, bw.pointer_bits))
    fh.write(_pack(c.row_indices, bw.index_bits))
    fh.write(_pack(c.values, bw.value_bits))


def read_csc(fh: BinaryIO) -> CscMatrix:
    head = fh.read(_HEADER.size)
    if len(head) < 4 or head[:4] != MAGIC:
        raise CscFormatError(f"bad magic {head[:4]!r}, expected {MAGIC!r}")
    if len(head) < _HEADER.size:
        raise MalformedCsc("truncated CSC header")
    _, version, rows, cols, nnz, vb, ib, pb, _ = _HEADER.unpack(head)
    if version != VERSION:
        raise CscFormatError(f"unsupported CSC version {version}")
    if min(vb, ib, pb) == 0:
        raise MalformedCsc("zero bit width in header")
    bw = BitWidths(value_bits=vb, index_bits=ib, pointer_bits=pb)
    arrays = []
    for count, width, signed in ((cols + 1, pb, False), (nnz, ib, False), (nnz, vb, True)):
        n = _array_bytes(count, width)
        buf = fh.read(n)
        if len(buf) != n:
            raise MalformedCsc(f"truncated CSC payload: wanted {n} bytes, got {len(buf)}")
        arrays.append(_unpack(buf, count, width, signed))
    if fh.read(1):
        raise MalformedCsc("trailing bytes after CSC payload")
    ptr, idx, val = arrays
    return CscMatrix(rows, cols, val, idx, ptr, bw)
