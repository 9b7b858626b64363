"""Area and energy model.

Areas are not synthesized: they are derived from the measured throughput per
area of the dense and sparse-on-dense designs at density 1.0, which keeps
every area ratio consistent with those measurements. Energy is event based
(per bit moved, per MAC slot, per decompressed element).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .memsys import TrafficReport
from .systolic import ArrayConfig

PJ = 1e-12
MB = 2 ** 20


@dataclass(frozen=True)
class CostParams:
    e_mac: float = 1.0          # pJ per mapped MAC slot
    e_sram_bit: float = 0.31    # pJ per global-buffer bit
    e_dram_bit: float = 40.0    # pJ per DRAM bit
    e_decomp_elem: float = 0.5  # pJ per dense element emitted by a decompression unit
    dense_logic_tpa: float = 0.956
    sod_logic_tpa: float = 0.946
    dense_total_tpa: float = 0.430
    sod_total_tpa: float = 0.428
    accumulator_fraction: float = 0.04  # share of dense logic area outside the PE grid
    idle_pe_power_fraction: float = 0.3
    power_gating_enabled: bool = False
    domain_rows: int = 8
    domain_cols: int = 8

    def __post_init__(self):
        for name in ("e_mac", "e_sram_bit", "e_dram_bit", "e_decomp_elem",
                     "dense_logic_tpa", "sod_logic_tpa", "dense_total_tpa", "sod_total_tpa"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.sod_logic_tpa > self.dense_logic_tpa:
            raise ValueError("sod_logic_tpa cannot exceed dense_logic_tpa")
        if not 0 <= self.idle_pe_power_fraction <= 1:
            raise ValueError("idle_pe_power_fraction must lie in [0, 1]")
        if not 0 <= self.accumulator_fraction < 1:
            raise ValueError("accumulator_fraction must lie in [0, 1)")
        if self.domain_rows < 1 or self.domain_cols < 1:
            raise ValueError("power domains must be positive")


@dataclass(frozen=True)
class AreaBreakdown:
    pe_array: float
    accumulator: float
    decomp: float
    sram: float

    @property
    def dense_logic(self) -> float:
        return self.pe_array + self.accumulator

    @property
    def sod_logic(self) -> float:
        return self.dense_logic + self.decomp

    def logic(self, with_decomp: bool) -> float:
        return self.sod_logic if with_decomp else self.dense_logic

    def total(self, with_decomp: bool) -> float:
        return self.logic(with_decomp) + self.sram

    @property
    def decomp_fraction(self) -> float:
        return self.decomp / self.dense_logic


@dataclass(frozen=True)
class EnergyBreakdown:
    dram: float
    sram: float
    mac: float
    idle: float
    decomp: float

    @property
    def total(self) -> float:
        return self.dram + self.sram + self.mac + self.idle + self.decomp


@dataclass(frozen=True)
class MetricsPoint:
    engine: str
    layer: str
    density_w: float
    density_i: float
    cycles: int
    compute_cycles: int
    dram_bits: int
    sram_bits: int
    mapped_macs: int
    effective_macs: int
    mapping_util: float
    effective_util: float
    raw_tops: float
    effective_tops: float
    tpa_logic: float
    tpa_total: float
    energy_joules: float
    energy_eff: float
    dense_ops: int
    areas: AreaBreakdown | None = None
    energy: EnergyBreakdown | None = None

    @property
    def density(self) -> float:
        return self.density_w


def peak_tops(cfg: ArrayConfig) -> float:
    return cfg.pe_rows * cfg.pe_cols * 2 * cfg.clock_hz / 1e12


def calibrated_areas(params: CostParams, cfg: ArrayConfig,
                     capacity_bytes: int = 2 * MB) -> AreaBreakdown:
    """Area breakdown in mm^2.

    The anchors are measured on the reference 2 MB design; SRAM area scales
    linearly with capacity, logic linearly with the PE count.
    """
    peak = peak_tops(cfg)
    dense_logic = peak / params.dense_logic_tpa
    sod_logic = peak / params.sod_logic_tpa
    sram_ref = peak / params.dense_total_tpa - dense_logic
    return AreaBreakdown(
        pe_array=dense_logic * (1 - params.accumulator_fraction),
        accumulator=dense_logic * params.accumulator_fraction,
        decomp=sod_logic - dense_logic,
        sram=sram_ref * capacity_bytes / (2 * MB),
    )


def effective_throughput(raw_time_s: float, dense_ops: int) -> float:
    """Dense-equivalent tera-ops per second: zeros count as work done."""
    if raw_time_s <= 0:
        raise ValueError("time must be positive")
    return dense_ops / raw_time_s / 1e12


def power_gating_saving(mapping_util: float, params: CostParams, pes: int = 4096) -> float:
    """Fraction of the array's power domains that can be switched off.

    Unmapped area is rounded down to whole domains, since a domain stays on
    while any of its PEs is in use.
    """
    if not 0.0 <= mapping_util <= 1.0:
        raise ValueError("mapping_util must lie in [0, 1]")
    if not params.power_gating_enabled:
        return 0.0
    domains = max(1, pes // (params.domain_rows * params.domain_cols))
    return math.floor((1.0 - mapping_util) * domains + 1e-9) / domains


def energy(traffic: TrafficReport, mapped_macs: int, total_mac_slots: int,
           decompressed_elems: int, params: CostParams, spatial_util: float = 1.0,
           pes: int = 4096) -> EnergyBreakdown:
    idle_slots = max(0, total_mac_slots - mapped_macs)
    gated = power_gating_saving(min(max(spatial_util, 0.0), 1.0), params, pes)
    idle_slots = max(0.0, idle_slots - gated * total_mac_slots)
    return EnergyBreakdown(
        dram=traffic.dram_bits * params.e_dram_bit * PJ,
        sram=traffic.sram_bits * params.e_sram_bit * PJ,
        mac=mapped_macs * params.e_mac * PJ,
        idle=idle_slots * params.idle_pe_power_fraction * params.e_mac * PJ,
        decomp=decompressed_elems * params.e_decomp_elem * PJ,
    )
