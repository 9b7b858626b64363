"""Experiment orchestration: density sweeps, benchmark suites, calibration.

Rows come out in a fixed order (engine as requested, then density or layer)
and floats are written with ``repr`` so a CSV is byte-stable for a given
config and seed and every average can be recomputed from the per-layer rows.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import baselines, cost, engine, suites
from .config import Config
from .cost import MetricsPoint
from .matcore import DenseMatrix, csc_decode, csc_encode, read_csc, write_csc
from .memsys import LayerShape

COLUMNS = ("experiment", "engine", "layer", "density_w", "density_i", "cycles", "dram_bits",
           "sram_bits", "mapped_macs", "effective_macs", "mapping_util", "effective_util",
           "tpa_logic", "tpa_total", "energy_j", "energy_eff")
AVERAGE = "average"
SIMULATED = (engine.SOD, engine.DENSE_ENGINE)


@dataclass(frozen=True)
class DensitySweep:
    start: float
    end: float
    step: float

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"sweep step must be positive, got {self.step}")
        if self.start > self.end:
            raise ValueError(f"sweep start {self.start} exceeds end {self.end}")
        if self.start <= 0 or self.end > 1:
            raise ValueError("sweep densities must lie in (0, 1]")

    @classmethod
    def parse(cls, text: str) -> "DensitySweep":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"density sweep must be start:end:step, got {text!r}")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError as e:
            raise ValueError(f"bad density sweep {text!r}: {e}") from None

    def points(self) -> list[float]:
        n = math.floor((self.end - self.start) / self.step + 1e-9) + 1
        return [round(self.start + i * self.step, 10) for i in range(n)]


@dataclass(frozen=True)
class Experiment:
    name: str
    engines: tuple[str, ...]
    layers: tuple[LayerShape, ...] = ()
    sweep: DensitySweep | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.engines:
            raise ValueError("at least one engine is required")
        bad = [e for e in self.engines if e not in baselines.ENGINES]
        if bad:
            raise ValueError(f"unknown engine(s) {', '.join(bad)}; choose from {', '.join(baselines.ENGINES)}")
        if len(set(self.engines)) != len(self.engines):
            raise ValueError("engine list has duplicates")


def parse_engines(text: str) -> tuple[str, ...]:
    return tuple(e.strip() for e in text.split(",") if e.strip())


# -- running -----------------------------------------------------------------------

def _run_simulated(kind: str, layer: LayerShape, cfg: Config, seed: int) -> MetricsPoint:
    return engine.run_layer(layer, kind, cfg.sim, seed)


def run_sweep(exp: Experiment, cfg: Config | None = None) -> list[tuple[str, MetricsPoint]]:
    """One point per (engine, density) on the config's sweep layer."""
    cfg = cfg or Config()
    if exp.sweep is None:
        raise ValueError("sweep experiment needs a density sweep")
    base = exp.layers[0] if exp.layers else cfg.sweep_layer

    @lru_cache(maxsize=None)
    def sod_at(d):
        return _run_simulated(engine.SOD, base.with_densities(weight=d), cfg, exp.seed)

    rows = []
    for kind in exp.engines:
        for d in exp.sweep.points():
            layer = base.with_densities(weight=d)
            if kind in SIMULATED:
                p = sod_at(d) if kind == engine.SOD else _run_simulated(kind, layer, cfg, exp.seed)
            else:
                p = baselines.sweep_point(kind, layer, sod_at, cfg.baseline)
            rows.append((exp.name, p))
    return rows


def run_benchmark(model: str, engines, cfg: Config | None = None, seed: int = 0,
                  with_averages: bool = True) -> list[tuple[str, MetricsPoint]]:
    """Per-layer points for each engine, followed by its network average."""
    cfg = cfg or Config()
    suite = suites.load_suite(model)
    engines = tuple(engines)
    if engines and engine.SOD not in engines:
        engines = (engine.SOD,) + engines  # advantages are quoted against SoD
    exp = Experiment(model, engines, suite.layers, seed=seed)
    rows = []
    for kind in exp.engines:
        pts = []
        for layer in suite.layers:
            if kind in SIMULATED:
                pts.append(_run_simulated(kind, layer, cfg, seed))
            else:
                pts.append(baselines.benchmark_point(kind, layer, cfg.sim, cfg.baseline, seed))
        rows += [(model, p) for p in pts]
        if with_averages:
            rows.append((model, network_average(pts)))
    return rows


def network_average(points) -> MetricsPoint:
    """Network-level figures weighted by each layer's MAC count.

    Throughput/area is total dense-equivalent work over total time, so a slow
    layer weighs in by the time it takes (a MAC-weighted harmonic mean).
    Energy efficiency is the MAC-weighted mean of the per-layer values.
    Counts are summed; utilizations are recomputed from the summed counts.
    """
    points = list(points)
    if not points:
        raise ValueError("no points to average")
    w = [p.dense_ops for p in points]
    total = sum(w)

    def harmonic(attr):
        return total / sum(wi / getattr(p, attr) for wi, p in zip(w, points))

    def mean(attr):
        return sum(wi * getattr(p, attr) for wi, p in zip(w, points)) / total

    def summed(attr):
        vals = [getattr(p, attr) for p in points]
        return None if any(v is None for v in vals) else sum(vals)

    cycles = summed("cycles")
    mapped = summed("mapped_macs")
    eff = summed("effective_macs")
    slots = None
    if cycles is not None:
        slots = sum(p.mapped_macs / p.mapping_util for p in points)
    return MetricsPoint(
        engine=points[0].engine, layer=AVERAGE,
        density_w=mean("density_w"), density_i=mean("density_i"),
        cycles=cycles, compute_cycles=summed("compute_cycles"),
        dram_bits=summed("dram_bits"), sram_bits=summed("sram_bits"),
        mapped_macs=mapped, effective_macs=eff,
        mapping_util=None if slots is None else mapped / slots,
        effective_util=None if slots is None else eff / slots,
        raw_tops=None, effective_tops=None,
        tpa_logic=harmonic("tpa_logic"), tpa_total=harmonic("tpa_total"),
        energy_joules=sum(p.energy_joules for p in points),
        energy_eff=mean("energy_eff"),
        dense_ops=total,
    )


def advantages(rows, baseline: str, reference: str = engine.SOD) -> tuple[float, float]:
    """(tpa, energy-eff) of ``reference`` over ``baseline`` from average rows."""
    avg = {p.engine: p for _, p in rows if p.layer == AVERAGE}
    if reference not in avg or baseline not in avg:
        raise ValueError(f"average rows for {reference} and {baseline} are required")
    r, b = avg[reference], avg[baseline]
    return r.tpa_logic / b.tpa_logic, r.energy_eff / b.energy_eff


# -- CSV ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def row_values(experiment: str, p: MetricsPoint) -> list[str]:
    return [_fmt(v) for v in (experiment, p.engine, p.layer, p.density_w, p.density_i, p.cycles,
                              p.dram_bits, p.sram_bits, p.mapped_macs, p.effective_macs,
                              p.mapping_util, p.effective_util, p.tpa_logic, p.tpa_total,
                              p.energy_joules, p.energy_eff)]


def to_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(COLUMNS)
    for exp, p in rows:
        wr.writerow(row_values(exp, p))
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- codec files -------------------------------------------------------------------

def dump_dtype(value_bits: int) -> np.dtype:
    """Smallest little-endian signed dtype holding ``value_bits``."""
    for nbytes in (1, 2, 4, 8):
        if value_bits <= 8 * nbytes:
            return np.dtype(f"<i{nbytes}")
    raise ValueError(f"value_bits {value_bits} exceeds 64")


def encode_file(src, dst, cfg: Config | None = None) -> None:
    """Dense ``.npy`` (2-D integer array) to the CSC disk format."""
    cfg = cfg or Config()
    try:
        arr = np.load(src, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise ValueError(f"{src}: not a readable .npy array ({e})") from None
    if arr.ndim != 2 or not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{src}: expected a 2-D integer array, got {arr.dtype} with shape {arr.shape}")
    m = DenseMatrix(arr, cfg.sim.bw.value_bits)
    c = csc_encode(m, cfg.sim.bw)
    with open(dst, "wb") as fh:
        write_csc(c, fh)


def decode_file(src, dst) -> None:
    """CSC file back to a dense ``.npy`` in the canonical dump dtype."""
    with open(src, "rb") as fh:
        c = read_csc(fh)
    m = csc_decode(c)
    with open(dst, "wb") as fh:
        np.save(fh, m.data.astype(dump_dtype(c.bw.value_bits)), allow_pickle=False)


# -- calibration -------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    value: float
    lo: float
    hi: float

    @property
    def ok(self) -> bool:
        return self.lo <= self.value <= self.hi


def calibration(cfg: Config | None = None) -> tuple[dict, list[Check]]:
    cfg = cfg or Config()
    cp, array = cfg.sim.cost, cfg.sim.array
    areas = cost.calibrated_areas(cp, array, cfg.sim.buffer.capacity_bytes)
    peak = cost.peak_tops(array)
    table = {
        "peak_tops": peak,
        "dense_tpa_logic": peak / areas.logic(False),
        "sod_tpa_logic": peak / areas.logic(True),
        "dense_tpa_total": peak / areas.total(False),
        "sod_tpa_total": peak / areas.total(True),
        "area_pe_array": areas.pe_array,
        "area_accumulator": areas.accumulator,
        "area_decomp": areas.decomp,
        "area_sram": areas.sram,
        "area_dense_logic": areas.dense_logic,
        "area_sod_logic": areas.sod_logic,
        "decomp_fraction": areas.decomp_fraction,
    }
    table["logic_degradation"] = 1 - table["sod_tpa_logic"] / table["dense_tpa_logic"]
    checks = [
        Check("dense_tpa_logic", round(table["dense_tpa_logic"], 3), cp.dense_logic_tpa, cp.dense_logic_tpa),
        Check("sod_tpa_logic", round(table["sod_tpa_logic"], 3), cp.sod_logic_tpa, cp.sod_logic_tpa),
        Check("dense_tpa_total", round(table["dense_tpa_total"], 3), cp.dense_total_tpa, cp.dense_total_tpa),
        Check("sod_tpa_total", round(table["sod_tpa_total"], 3), round(cp.sod_total_tpa, 3), round(cp.sod_total_tpa, 3)),
        Check("logic_degradation", table["logic_degradation"], 0.0, 0.02),
        Check("decomp_fraction", table["decomp_fraction"], 0.01, 0.03),
    ]
    return table, checks


def calibration_report(table: dict, checks) -> str:
    lines = ["# throughput per area (effective TOPS/mm^2)",
             f"{'design':<10}{'logic':>10}{'logic+sram':>12}",
             f"{'dense':<10}{table['dense_tpa_logic']:>10.3f}{table['dense_tpa_total']:>12.3f}",
             f"{'sod':<10}{table['sod_tpa_logic']:>10.3f}{table['sod_tpa_total']:>12.3f}",
             "",
             "# area breakdown (mm^2)"]
    for k in ("pe_array", "accumulator", "decomp", "sram", "dense_logic", "sod_logic"):
        lines.append(f"{k:<14}{table['area_' + k]:>10.4f}")
    lines += ["",
              f"decomp share of dense logic  {100 * table['decomp_fraction']:.2f}%",
              f"sod logic tpa degradation    {100 * table['logic_degradation']:.2f}%",
              "",
              "# checks"]
    for c in checks:
        lines.append(f"{'PASS' if c.ok else 'FAIL'}  {c.name} = {c.value:.4g} (expected [{c.lo:.4g}, {c.hi:.4g}])")
    return "\n".join(lines) + "\n"


# -- figures -----------------------------------------------------------------------

def figure_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".png")


def plot_sweep(rows, path) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_engine: dict[str, list[MetricsPoint]] = {}
    for _, p in rows:
        by_engine.setdefault(p.engine, []).append(p)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for kind, pts in by_engine.items():
        ds = [p.density_w for p in pts]
        ax1.plot(ds, [p.tpa_logic for p in pts], marker="o", label=kind)
        ax2.plot(ds, [p.energy_eff / 1e12 for p in pts], marker="o", label=kind)
    ax1.set_xlabel("weight density")
    ax1.set_ylabel("effective TOPS/mm$^2$ (logic)")
    ax2.set_xlabel("weight density")
    ax2.set_ylabel("effective TOPS/W")
    ax2.set_yscale("log")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_benchmark(rows, path, reference: str = engine.SOD) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ref = {p.layer: p for _, p in rows if p.engine == reference}
    others = sorted({p.engine for _, p in rows} - {reference})
    layers = [l for l in ref]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    width = 0.8 / max(1, len(others))
    x = np.arange(len(layers))
    for i, kind in enumerate(others):
        pts = {p.layer: p for _, p in rows if p.engine == kind}
        tpa = [ref[l].tpa_logic / pts[l].tpa_logic for l in layers]
        en = [ref[l].energy_eff / pts[l].energy_eff for l in layers]
        ax1.bar(x + i * width, tpa, width, label=f"{reference}/{kind}")
        ax2.bar(x + i * width, en, width, label=f"{reference}/{kind}")
    for ax, title in ((ax1, "throughput/area ratio"), (ax2, "energy-efficiency ratio")):
        ax.axhline(1.0, color="k", lw=0.8)
        ax.set_xticks(x + width * (len(others) - 1) / 2)
        ax.set_xticklabels(layers, rotation=60, ha="right", fontsize=7)
        ax.set_ylabel(title)
        ax.set_yscale("log")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
