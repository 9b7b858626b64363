"""Layer-level runs of the sparse-on-dense accelerator and the dense baseline.

Tile-level behaviour (cycle formula, decompression time, buffer planning) is
taken from the component models; here tiles are chained with double
buffering, so the next tile's weight preload and decompression hide under
the current tile's input streaming.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import cost, memsys
from .decomp import DecompConfig, tile_cycles as decomp_tile_cycles
from .matcore import CSC, DENSE, BitWidths, random_mask, splitmix64
from .memsys import ARRAY_TILE, BufferConfig, LayerShape
from .systolic import ArrayConfig

SOD = "sod"
DENSE_ENGINE = "dense"
POLICIES = ("csc", "dense", "auto")


@dataclass(frozen=True)
class SimConfig:
    array: ArrayConfig = field(default_factory=ArrayConfig)
    buffer: BufferConfig = field(default_factory=BufferConfig)
    decomp: DecompConfig = field(default_factory=DecompConfig)
    cost: cost.CostParams = field(default_factory=cost.CostParams)
    weight_policy: str = "csc"
    input_policy: str = "auto"
    exact_effective_macs: bool = True

    def __post_init__(self):
        for p in (self.weight_policy, self.input_policy):
            if p not in POLICIES:
                raise ValueError(f"format policy must be one of {POLICIES}, got {p!r}")

    @property
    def bw(self) -> BitWidths:
        return self.array.bw


def _choose(policy: str, rows: int, cols: int, density: float, bw: BitWidths) -> str:
    if policy != "auto":
        return policy
    csc = memsys.stored_bits(rows, cols, density, CSC, bw)
    dense = memsys.stored_bits(rows, cols, density, DENSE, bw)
    return CSC if csc < dense else DENSE


def formats_for(layer: LayerShape, engine: str, cfg: SimConfig) -> tuple[str, str]:
    """Storage format of (weights, inputs); the dense engine never compresses."""
    if engine == DENSE_ENGINE:
        return DENSE, DENSE
    return (_choose(cfg.weight_policy, layer.K, layer.N, layer.weight_density, cfg.bw),
            _choose(cfg.input_policy, layer.K, layer.M, layer.input_density, cfg.bw))


def derive_seed(seed: int, *parts) -> int:
    h = zlib.crc32(repr(parts).encode())
    return int(splitmix64(seed ^ (h << 20), 0, 1)[0])


@lru_cache(maxsize=256)
def _effective_macs(M, K, N, dw, di, seed) -> int:
    # inputs are drawn transposed (K x M), matching their stored layout
    per_k_w = random_mask(K, N, dw, derive_seed(seed, "weight")).sum(axis=1, dtype=np.int64)
    per_k_i = random_mask(K, M, di, derive_seed(seed, "input")).sum(axis=1, dtype=np.int64)
    return int(per_k_i @ per_k_w)


def effective_macs(layer: LayerShape, cfg: SimConfig, seed: int) -> int:
    if not cfg.exact_effective_macs:
        return round(layer.macs * layer.weight_density * layer.input_density)
    one = _effective_macs(layer.M, layer.K, layer.N, layer.weight_density,
                          layer.input_density, derive_seed(seed, layer.name, layer.M, layer.K, layer.N))
    return one * layer.groups


def _sizes(total: int, block: int) -> list[tuple[int, int]]:
    """(size, count) pairs of a 1-D blocking."""
    full, rem = divmod(total, block)
    out = [(block, full)] if full else []
    if rem:
        out.append((rem, 1))
    return out


@dataclass(frozen=True)
class CycleBreakdown:
    compute_cycles: int     # array only: preload, streaming, drain
    decomp_exposed: int     # decompression time not hidden behind the array
    spatial_util: float     # cycle-weighted fraction of PEs holding a weight

    @property
    def cycles(self) -> int:
        return self.compute_cycles + self.decomp_exposed


def layer_cycles(layer: LayerShape, plan: memsys.TilePlan, cfg: SimConfig) -> CycleBreakdown:
    R, C = cfg.array.pe_rows, cfg.array.pe_cols
    dc = cfg.decomp
    w_csc = plan.weight_format == CSC
    in_csc = plan.input_format == CSC
    array_only = 0
    with_decomp = 0
    weighted_pes = 0
    stream = 0
    for m, m_cnt in _sizes(layer.M, plan.M_t):
        for k, k_cnt in _sizes(layer.K, min(R, ARRAY_TILE)):
            for n, n_cnt in _sizes(layer.N, min(C, ARRAY_TILE)):
                count = m_cnt * k_cnt * n_cnt
                d = 0
                if w_csc:
                    nnz = round(layer.weight_density * k * n)
                    d = decomp_tile_cycles(k, n, nnz, dc) if dc.double_buffered else 0
                array_only += max(m, k) * count
                with_decomp += max(m, k, d) * count
                weighted_pes += k * n * m * count
                stream += m * count
    g = layer.groups
    first_k = min(layer.K, R)
    compute = first_k + array_only * g + R + C - 2
    exposed = (with_decomp - array_only) * g
    # prologue: the first tile cannot start before its data is decompressed
    if w_csc:
        first_n = min(layer.N, C)
        nnz0 = round(layer.weight_density * first_k * first_n)
        exposed += decomp_tile_cycles(first_k, first_n, nnz0, dc)
    if in_csc:
        exposed += math.ceil((min(plan.M_t, layer.M) + 1) / dc.ptr_fetch_width) + dc.pipeline_latency
    if not dc.double_buffered and w_csc:
        per_tile = 0
        for m, m_cnt in _sizes(layer.M, plan.M_t):
            for k, k_cnt in _sizes(layer.K, ARRAY_TILE):
                for n, n_cnt in _sizes(layer.N, ARRAY_TILE):
                    nnz = round(layer.weight_density * k * n)
                    per_tile += decomp_tile_cycles(k, n, nnz, dc) * m_cnt * k_cnt * n_cnt
        exposed += per_tile * g
    return CycleBreakdown(compute, exposed, weighted_pes / (R * C * stream))


def decompressed_elements(layer: LayerShape, plan: memsys.TilePlan) -> int:
    out = 0
    if plan.weight_format == CSC:
        out += layer.K * layer.N * math.ceil(layer.M / plan.M_t)
    if plan.input_format == CSC:
        out += layer.M * layer.K * math.ceil(layer.N / ARRAY_TILE)
    return out * layer.groups


def run_layer(layer: LayerShape, engine: str = SOD, cfg: SimConfig | None = None,
              seed: int = 0) -> cost.MetricsPoint:
    cfg = cfg or SimConfig()
    if engine not in (SOD, DENSE_ENGINE):
        raise ValueError(f"run_layer simulates 'sod' or 'dense', not {engine!r}")
    bw = cfg.bw
    fmts = formats_for(layer, engine, cfg)
    plan = memsys.plan_tiles(layer, cfg.buffer, fmts, bw)
    tr = memsys.traffic(layer, plan, bw)
    cyc = layer_cycles(layer, plan, cfg)

    R, C = cfg.array.pe_rows, cfg.array.pe_cols
    cycles = cyc.cycles
    total_slots = R * C * cycles
    mapped = layer.macs
    eff = effective_macs(layer, cfg, seed)
    seconds = cycles / cfg.array.clock_hz
    has_decomp = engine == SOD

    areas = cost.calibrated_areas(cfg.cost, cfg.array, cfg.buffer.capacity_bytes)
    decomp_elems = decompressed_elements(layer, plan)
    en = cost.energy(tr, mapped, total_slots, decomp_elems, cfg.cost,
                     spatial_util=cyc.spatial_util, pes=R * C)
    eff_tops = cost.effective_throughput(seconds, layer.dense_ops)
    raw_tops = 2 * eff / seconds / 1e12
    return cost.MetricsPoint(
        engine=engine,
        layer=layer.name,
        density_w=layer.weight_density,
        density_i=layer.input_density,
        cycles=cycles,
        compute_cycles=cyc.compute_cycles,
        dram_bits=tr.dram_bits,
        sram_bits=tr.sram_bits,
        mapped_macs=mapped,
        effective_macs=eff,
        mapping_util=mapped / total_slots,
        effective_util=eff / total_slots,
        raw_tops=raw_tops,
        effective_tops=eff_tops,
        tpa_logic=eff_tops / areas.logic(has_decomp),
        tpa_total=eff_tops / areas.total(has_decomp),
        energy_joules=en.total,
        energy_eff=layer.dense_ops / en.total,
        dense_ops=layer.dense_ops,
        areas=areas,
        energy=en,
    )


def runtime_cycles(point: cost.MetricsPoint, cfg: SimConfig) -> int:
    """Wall-clock cycles once DRAM transfers are overlapped with compute."""
    dram = math.ceil(point.dram_bits / cfg.buffer.dram_bus_bits_per_cycle)
    return max(point.cycles, dram) if cfg.decomp.double_buffered else point.cycles + dram


def with_policy(cfg: SimConfig, weight=None, inp=None) -> SimConfig:
    return replace(cfg, weight_policy=weight or cfg.weight_policy, input_policy=inp or cfg.input_policy)
