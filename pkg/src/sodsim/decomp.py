"""Cycle-level model of the CSC decompression unit.

The unit sits between the global buffer and the PE array:

1. pointer fetch into the pointer buffer,
2. per-column nonzero counts by subtracting neighbouring pointers while the
   (index, value) pairs stream into the nonzero buffer,
3. element selection and
4. dense mapping route each fetched pair to its column in the dense buffer,
5. dense columns are fed to the array.

Stages 2-4 are pipelined; ``pipeline_latency`` is charged once per tile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MalformedCsc
from .matcore import CscMatrix, DenseMatrix


@dataclass(frozen=True)
class DecompConfig:
    nz_fetch_width: int = 64
    ptr_fetch_width: int = 16
    pipeline_latency: int = 4
    dense_feed_width: int = 64
    double_buffered: bool = True

    def __post_init__(self):
        for name in ("nz_fetch_width", "ptr_fetch_width", "dense_feed_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.pipeline_latency < 0:
            raise ValueError("pipeline_latency must be non-negative")


@dataclass(frozen=True)
class DecompTrace:
    cycles_total: int
    cycles_stalled: int
    dense_out: DenseMatrix
    nz_words_read: int
    ptr_words_read: int
    pointer_cycles: int = 0
    fetch_cycles: int = 0
    emit_cycles: int = 0


def load_pointers(c: CscMatrix | int, cfg: DecompConfig) -> int:
    cols = c if isinstance(c, int) else c.cols
    return math.ceil((cols + 1) / cfg.ptr_fetch_width)


def column_lengths(col_pointers) -> np.ndarray:
    ptr = np.asarray(col_pointers, dtype=np.int64)
    out = np.diff(ptr)
    if np.any(out < 0):
        raise MalformedCsc("negative column length: pointers decrease")
    return out


def tile_cycles(rows: int, cols: int, nnz: int, cfg: DecompConfig) -> int:
    """Closed-form cycle count for one tile when fetch never starves emission."""
    per_col = math.ceil(rows / cfg.dense_feed_width)
    return (load_pointers(cols, cfg) + cfg.pipeline_latency
            + max(math.ceil(nnz / cfg.nz_fetch_width), cols * per_col))


def simulate_decompression(c: CscMatrix, cfg: DecompConfig | None = None) -> DecompTrace:
    cfg = cfg or DecompConfig()
    c.validate()

    # Step 1: pointer buffer fill
    ptr_cycles = load_pointers(c, cfg)
    pointers = c.col_pointers
    lengths = column_lengths(pointers)

    # Step 2: nonzero buffer rows arrive one per cycle
    nnz = c.nnz
    fetch_cycles = math.ceil(nnz / cfg.nz_fetch_width)
    dense = np.zeros((c.rows, c.cols), dtype=np.int64)
    # column of every stored element, recovered from the pointer differences
    owner = np.repeat(np.arange(c.cols), lengths)
    for f in range(fetch_cycles):
        lo, hi = f * cfg.nz_fetch_width, min((f + 1) * cfg.nz_fetch_width, nnz)
        # Steps 3/4: one buffer row can straddle several original columns;
        # every element is routed to its own column in the same cycle
        dense[c.row_indices[lo:hi], owner[lo:hi]] = c.values[lo:hi]

    # Step 5: column-by-column emission in dense_feed_width chunks; the last
    # chunk of a column waits for its last element (same-cycle forwarding,
    # latency charged once)
    per_col = math.ceil(c.rows / cfg.dense_feed_width)
    last_fetch = np.where(lengths > 0, -(-pointers[1:] // cfg.nz_fetch_width) - 1, -1)
    t = 0
    stalled = 0
    for col in range(c.cols):
        ready = int(last_fetch[col]) - (per_col - 1)
        if ready > t:
            stalled += ready - t
            t = ready
        t += per_col
    emit_cycles = t

    return DecompTrace(
        cycles_total=ptr_cycles + cfg.pipeline_latency + emit_cycles,
        cycles_stalled=stalled,
        dense_out=DenseMatrix(dense, c.bw.value_bits),
        nz_words_read=nnz,
        ptr_words_read=c.cols + 1,
        pointer_cycles=ptr_cycles,
        fetch_cycles=fetch_cycles,
        emit_cycles=emit_cycles,
    )
