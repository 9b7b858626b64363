"""Global buffer model: block planning and DRAM/SRAM traffic accounting.

Loop nest (outermost first): M-blocks, N-blocks, K-blocks. A block holds
``M_t x K_t`` inputs, ``K_t x N_t`` weights and ``M_t x N_t`` partial sums,
each in its own buffer partition. Partial sums stay on chip across K, so
outputs are written to DRAM once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import Infeasible
from .matcore import CSC, DENSE, FORMATS, BitWidths
from .systolic import ConvGeometry

ARRAY_TILE = 64


@dataclass(frozen=True)
class BufferConfig:
    capacity_bytes: int = 2 * 2 ** 20
    weight_fraction: float = 0.4
    input_fraction: float = 0.4
    psum_fraction: float = 0.2
    dram_bus_bits_per_cycle: int = 128

    def __post_init__(self):
        if self.capacity_bytes <= 0:
            raise ValueError("buffer capacity must be positive")
        fr = (self.weight_fraction, self.input_fraction, self.psum_fraction)
        if min(fr) <= 0 or not math.isclose(sum(fr), 1.0, abs_tol=1e-9):
            raise ValueError(f"buffer split {fr} must be positive and sum to 1")
        if self.dram_bus_bits_per_cycle <= 0:
            raise ValueError("DRAM bus width must be positive")

    def partition_bits(self, which: str) -> int:
        frac = {"weight": self.weight_fraction, "input": self.input_fraction,
                "psum": self.psum_fraction}[which]
        return int(self.capacity_bytes * 8 * frac)


@dataclass(frozen=True)
class LayerShape:
    M: int
    K: int
    N: int
    weight_density: float = 1.0
    input_density: float = 1.0
    name: str = ""
    groups: int = 1
    conv: ConvGeometry | None = None

    def __post_init__(self):
        if min(self.M, self.K, self.N, self.groups) < 1:
            raise ValueError(f"layer dims must be positive: {self}")
        for d in (self.weight_density, self.input_density):
            if not 0.0 <= d <= 1.0:
                raise ValueError(f"density {d} outside [0, 1]")

    @property
    def macs(self) -> int:
        return self.M * self.K * self.N * self.groups

    @property
    def dense_ops(self) -> int:
        return 2 * self.macs

    def with_densities(self, weight=None, inp=None) -> "LayerShape":
        return replace(self,
                       weight_density=self.weight_density if weight is None else weight,
                       input_density=self.input_density if inp is None else inp)


@dataclass(frozen=True)
class TilePlan:
    M_t: int
    K_t: int
    N_t: int
    weight_format: str
    input_format: str

    @property
    def logical_elements(self) -> int:
        return self.M_t * self.K_t + self.K_t * self.N_t


@dataclass(frozen=True)
class TrafficReport:
    dram_read_bits: int
    dram_write_bits: int
    sram_read_bits: int
    sram_write_bits: int
    weight_passes: int
    input_passes: int
    weight_stored_bits: int = 0
    input_stored_bits: int = 0

    @property
    def dram_bits(self) -> int:
        return self.dram_read_bits + self.dram_write_bits

    @property
    def sram_bits(self) -> int:
        return self.sram_read_bits + self.sram_write_bits


def _formats(fmt) -> tuple[str, str]:
    w, i = (fmt, fmt) if isinstance(fmt, str) else tuple(fmt)
    for f in (w, i):
        if f not in FORMATS:
            raise ValueError(f"unknown format {f!r}")
    return w, i


def stored_bits(rows: int, cols: int, density: float, fmt: str, bw: BitWidths,
                tile: int = ARRAY_TILE) -> int:
    """Expected storage of a rows x cols operand.

    CSC operands are compressed per ``tile x tile`` block (rows = contraction
    side), so each block carries its own ``tile_cols + 1`` pointers.
    """
    if fmt == DENSE:
        return rows * cols * bw.value_bits
    nnz = round(density * rows * cols)
    row_tiles = math.ceil(rows / tile)
    col_tiles = math.ceil(cols / tile)
    pointers = row_tiles * (cols + col_tiles)
    return nnz * bw.csc_element_bits + pointers * bw.pointer_bits


def layer_stored_bits(layer: LayerShape, fmt, bw: BitWidths) -> tuple[int, int]:
    wf, inf = _formats(fmt)
    w = stored_bits(layer.K, layer.N, layer.weight_density, wf, bw)
    # inputs are kept transposed (K x M) so each CSC column is one input vector
    i = stored_bits(layer.K, layer.M, layer.input_density, inf, bw)
    return w, i


def _fits(layer, M_t, K_t, N_t, wf, inf, buf, bw) -> bool:
    return (stored_bits(K_t, N_t, layer.weight_density, wf, bw) <= buf.partition_bits("weight")
            and stored_bits(K_t, M_t, layer.input_density, inf, bw) <= buf.partition_bits("input")
            and M_t * N_t * bw.psum_bits <= buf.partition_bits("psum"))


def _passes(layer, M_t, K_t, N_t) -> tuple[int, int]:
    weights_resident = K_t >= layer.K and N_t >= layer.N
    weight_passes = 1 if weights_resident else math.ceil(layer.M / M_t)
    input_passes = 1 if K_t >= layer.K else math.ceil(layer.N / N_t)
    return weight_passes, input_passes


def _steps(total: int) -> list[int]:
    vals = list(range(ARRAY_TILE, total, ARRAY_TILE))
    return vals + [total]


def _largest_m(layer, K_t, N_t, wf, inf, buf, bw) -> int | None:
    cands = _steps(layer.M)
    if not _fits(layer, cands[0], K_t, N_t, wf, inf, buf, bw):
        return None
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _fits(layer, cands[mid], K_t, N_t, wf, inf, buf, bw):
            lo = mid
        else:
            hi = mid - 1
    return cands[lo]


def plan_tiles(layer: LayerShape, buf: BufferConfig | None = None, fmt=DENSE,
               bw: BitWidths | None = None) -> TilePlan:
    """Choose on-chip block sizes (multiples of the array tile).

    Among all feasible blocks the plan with the least DRAM traffic wins; ties
    go to the larger K, then N, then M block. Since a larger buffer only adds
    feasible blocks, traffic can never grow with capacity.
    """
    buf = buf or BufferConfig()
    bw = bw or BitWidths()
    wf, inf = _formats(fmt)
    k_opts = sorted({min(ARRAY_TILE, layer.K), layer.K})
    best = None
    for K_t in k_opts:
        for N_t in _steps(layer.N):
            M_t = _largest_m(layer, K_t, N_t, wf, inf, buf, bw)
            if M_t is None:
                continue
            plan = TilePlan(M_t, K_t, N_t, wf, inf)
            key = (traffic(layer, plan, bw).dram_bits, -K_t, -N_t, -M_t)
            if best is None or key < best[0]:
                best = (key, plan)
    if best is None:
        raise Infeasible(f"a single {ARRAY_TILE}x{ARRAY_TILE} block of layer "
                         f"{layer.name or (layer.M, layer.K, layer.N)} does not fit the buffer")
    return best[1]


def traffic(layer: LayerShape, plan: TilePlan, bw: BitWidths | None = None) -> TrafficReport:
    bw = bw or BitWidths()
    g = layer.groups
    w_bits, i_bits = layer_stored_bits(layer, (plan.weight_format, plan.input_format), bw)
    weight_passes, input_passes = _passes(layer, plan.M_t, plan.K_t, plan.N_t)
    out_bits = layer.M * layer.N * bw.value_bits

    dram_read = w_bits * weight_passes + i_bits * input_passes
    dram_write = out_bits

    # array side: every weight tile is read once per M-block, every input
    # vector once per array column tile; psums make one round trip per K tile
    m_blocks = math.ceil(layer.M / plan.M_t)
    n_tiles = math.ceil(layer.N / ARRAY_TILE)
    k_tiles = math.ceil(layer.K / ARRAY_TILE)
    psum_bits = layer.M * layer.N * bw.psum_bits
    sram_read = w_bits * m_blocks + i_bits * n_tiles + psum_bits * (k_tiles - 1) + out_bits
    sram_write = dram_read + psum_bits * k_tiles

    return TrafficReport(
        dram_read_bits=dram_read * g,
        dram_write_bits=dram_write * g,
        sram_read_bits=sram_read * g,
        sram_write_bits=sram_write * g,
        weight_passes=weight_passes,
        input_passes=input_passes,
        weight_stored_bits=w_bits * g,
        input_stored_bits=i_bits * g,
    )


def dram_cycles(report: TrafficReport, bus_bits_per_cycle: int) -> int:
    if bus_bits_per_cycle <= 0:
        raise ValueError("bus width must be positive")
    return math.ceil((report.dram_read_bits + report.dram_write_bits) / bus_bits_per_cycle)


def runtime_cycles(compute_cycles: int, decomp_cycles: int, dram: int, double_buffered: bool = True) -> int:
    if double_buffered:
        return max(compute_cycles + decomp_cycles, dram)
    return compute_cycles + decomp_cycles + dram
