"""Weight-stationary systolic array, simulated register by register.

Weights sit in the PEs (contraction dim K on array rows, output dim N on
array columns). Input rows enter the left edge skewed by one cycle per array
row and move right one PE per cycle; partial sums move down one PE per cycle
and leave the bottom edge into the accumulator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AccumulatorOverflow, TileTooLarge
from .matcore import BitWidths, DenseMatrix


@dataclass(frozen=True)
class ArrayConfig:
    pe_rows: int = 64
    pe_cols: int = 64
    clock_hz: float = 5e8
    bw: BitWidths = field(default_factory=BitWidths)

    def __post_init__(self):
        if self.pe_rows < 1 or self.pe_cols < 1:
            raise ValueError("array dimensions must be positive")
        if self.clock_hz <= 0:
            raise ValueError("clock_hz must be positive")

    @property
    def num_pes(self) -> int:
        return self.pe_rows * self.pe_cols


@dataclass(frozen=True)
class MatmulTrace:
    out: DenseMatrix
    cycles: int
    total_mac_slots: int
    mapped_macs: int
    effective_macs: int


@dataclass(frozen=True)
class Utilization:
    mapping_util: float
    effective_util: float


def tile_cycles(m_t: int, k_t: int, cfg: ArrayConfig) -> int:
    """Weight preload plus skewed streaming and full drain for one tile."""
    return k_t + m_t + cfg.pe_rows + cfg.pe_cols - 2


def effective_pairs(input_nz: np.ndarray, weight_nz: np.ndarray) -> int:
    """Number of (i, k, n) with input[i, k] != 0 and weight[k, n] != 0."""
    per_k_in = np.count_nonzero(input_nz, axis=0).astype(np.int64)
    per_k_w = np.count_nonzero(weight_nz, axis=1).astype(np.int64)
    return int(per_k_in @ per_k_w)


def _psum_limit(bw: BitWidths) -> int:
    return (1 << (bw.psum_bits - 1)) - 1


def simulate_tile_matmul(input_tile: DenseMatrix, weight_tile: DenseMatrix,
                         cfg: ArrayConfig | None = None) -> MatmulTrace:
    cfg = cfg or ArrayConfig()
    R, C = cfg.pe_rows, cfg.pe_cols
    m_t, k_t = input_tile.shape
    k_w, n_t = weight_tile.shape
    if k_w != k_t:
        raise ValueError(f"contraction mismatch: input has {k_t}, weight has {k_w}")
    if k_t > R or n_t > C:
        raise TileTooLarge(f"tile {k_t}x{n_t} does not fit a {R}x{C} array")
    limit = _psum_limit(cfg.bw)

    # preload: one weight row per cycle into the stationary registers
    weights = np.zeros((R, C), dtype=np.int64)
    cycles = 0
    for r in range(k_t):
        weights[r, :n_t] = weight_tile.data[r]
        cycles += 1

    x = np.zeros((m_t, R), dtype=np.int64)
    x[:, :k_t] = input_tile.data
    act = np.zeros((R, C), dtype=np.int64)
    psum = np.zeros((R, C), dtype=np.int64)
    out = np.zeros((m_t, C), dtype=np.int64)
    rows = np.arange(R)
    cols = np.arange(C)

    stream_cycles = m_t + R + C - 2
    for t in range(stream_cycles):
        # left edge: row r receives input row (t - r), zero outside the skew window
        src = t - rows
        live = (src >= 0) & (src < m_t)
        edge = np.zeros(R, dtype=np.int64)
        edge[live] = x[src[live], rows[live]]
        act[:, 1:] = act[:, :-1]
        act[:, 0] = edge
        prod = act * weights
        psum[1:, :] = psum[:-1, :] + prod[1:, :]
        psum[0, :] = prod[0, :]
        if np.abs(psum).max() > limit:
            raise AccumulatorOverflow(f"partial sum exceeds {cfg.bw.psum_bits} bits at cycle {cycles + t}")
        # bottom edge: column c emits output row (t - (R-1) - c)
        i = t - (R - 1) - cols
        done = (i >= 0) & (i < m_t)
        out[i[done], cols[done]] = psum[R - 1, done]
    cycles += stream_cycles

    in_nz = input_tile.data != 0
    w_nz = weight_tile.data != 0
    return MatmulTrace(
        out=DenseMatrix(out[:, :n_t], cfg.bw.psum_bits),
        cycles=cycles,
        total_mac_slots=R * C * cycles,
        mapped_macs=m_t * k_t * n_t,
        effective_macs=effective_pairs(in_nz, w_nz),
    )


def accumulate(partials: Sequence[DenseMatrix], bw: BitWidths | None = None) -> DenseMatrix:
    bw = bw or BitWidths()
    if not partials:
        raise ValueError("nothing to accumulate")
    shape = partials[0].shape
    total = np.zeros(shape, dtype=np.int64)
    limit = _psum_limit(bw)
    for p in partials:
        if p.shape != shape:
            raise ValueError(f"partial shape {p.shape} differs from {shape}")
        total = total + p.data
        if total.size and np.abs(total).max() > limit:
            raise AccumulatorOverflow(f"accumulator exceeds {bw.psum_bits} bits")
    return DenseMatrix(total, bw.psum_bits)


def utilization(trace: MatmulTrace) -> Utilization:
    if trace.total_mac_slots == 0:
        return Utilization(0.0, 0.0)
    return Utilization(trace.mapped_macs / trace.total_mac_slots,
                       trace.effective_macs / trace.total_mac_slots)


def tiled_matmul(a: DenseMatrix, b: DenseMatrix, cfg: ArrayConfig | None = None) -> tuple[DenseMatrix, list[MatmulTrace]]:
    """Run a full matmul as array-sized tiles, accumulating over K tiles."""
    cfg = cfg or ArrayConfig()
    M, K = a.shape
    N = b.shape[1]
    out = np.zeros((M, N), dtype=np.int64)
    traces = []
    for n0 in range(0, N, cfg.pe_cols):
        n1 = min(n0 + cfg.pe_cols, N)
        partials = []
        for k0 in range(0, K, cfg.pe_rows):
            k1 = min(k0 + cfg.pe_rows, K)
            tr = simulate_tile_matmul(DenseMatrix(a.data[:, k0:k1], a.value_bits),
                                      DenseMatrix(b.data[k0:k1, n0:n1], b.value_bits), cfg)
            traces.append(tr)
            partials.append(tr.out)
        out[:, n0:n1] = accumulate(partials, cfg.bw).data
    return DenseMatrix(out, cfg.bw.psum_bits), traces


# -- convolution lowering ------------------------------------------------------

@dataclass(frozen=True)
class ConvGeometry:
    in_h: int
    in_w: int
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    pad: int = 0
    groups: int = 1

    @property
    def out_h(self) -> int:
        return (self.in_h + 2 * self.pad - self.kernel) // self.stride + 1

    @property
    def out_w(self) -> int:
        return (self.in_w + 2 * self.pad - self.kernel) // self.stride + 1

    def matmul_dims(self) -> tuple[int, int, int]:
        """(M, K, N) of one group after im2col lowering."""
        return (self.out_h * self.out_w,
                self.kernel * self.kernel * (self.in_ch // self.groups),
                self.out_ch // self.groups)


def im2col(x: np.ndarray, kernel: int, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Unroll an (H, W, C) input into (out_h*out_w, kernel*kernel*C) patch rows."""
    h, w, ch = x.shape
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    oh = (h + 2 * pad - kernel) // stride + 1
    ow = (w + 2 * pad - kernel) // stride + 1
    rows = np.empty((oh * ow, kernel * kernel * ch), dtype=x.dtype)
    for i in range(oh):
        for j in range(ow):
            patch = xp[i * stride:i * stride + kernel, j * stride:j * stride + kernel, :]
            rows[i * ow + j] = patch.reshape(-1)
    return rows


def filters_to_matrix(wt: np.ndarray) -> np.ndarray:
    """(kernel, kernel, C_in, C_out) filters -> (kernel*kernel*C_in, C_out) weight matrix."""
    kh, kw, ci, co = wt.shape
    return wt.reshape(kh * kw * ci, co)
