"""Flat ``key = value`` experiment config.

One assignment per line; ``#`` starts a comment. Unknown keys and malformed
values are errors carrying the file and line they came from. ``--set``
overrides are parsed with the same rules and applied last.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from . import baselines, cost
from .decomp import DecompConfig
from .engine import POLICIES, SimConfig
from .errors import ConfigError
from .matcore import BitWidths
from .memsys import BufferConfig, LayerShape
from .systolic import ArrayConfig


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _policy(text: str) -> str:
    if text not in POLICIES:
        raise ValueError(f"expected one of {', '.join(POLICIES)}, got {text!r}")
    return text


# key -> (section, field, parser)
_FIELDS = {
    "array.rows": ("array", "pe_rows", int),
    "array.cols": ("array", "pe_cols", int),
    "array.clock_hz": ("array", "clock_hz", float),
    "bits.value": ("bits", "value_bits", int),
    "bits.index": ("bits", "index_bits", int),
    "bits.pointer": ("bits", "pointer_bits", int),
    "bits.psum": ("bits", "psum_bits", int),
    "buffer.capacity_bytes": ("buffer", "capacity_bytes", int),
    "buffer.weight_fraction": ("buffer", "weight_fraction", float),
    "buffer.input_fraction": ("buffer", "input_fraction", float),
    "buffer.psum_fraction": ("buffer", "psum_fraction", float),
    "buffer.dram_bus_bits": ("buffer", "dram_bus_bits_per_cycle", int),
    "decomp.nz_fetch_width": ("decomp", "nz_fetch_width", int),
    "decomp.ptr_fetch_width": ("decomp", "ptr_fetch_width", int),
    "decomp.pipeline_latency": ("decomp", "pipeline_latency", int),
    "decomp.dense_feed_width": ("decomp", "dense_feed_width", int),
    "decomp.double_buffered": ("decomp", "double_buffered", _bool),
    "energy.mac_pj": ("cost", "e_mac", float),
    "energy.sram_pj_per_bit": ("cost", "e_sram_bit", float),
    "energy.dram_pj_per_bit": ("cost", "e_dram_bit", float),
    "energy.decomp_pj": ("cost", "e_decomp_elem", float),
    "energy.idle_pe_fraction": ("cost", "idle_pe_power_fraction", float),
    "area.dense_logic_tpa": ("cost", "dense_logic_tpa", float),
    "area.sod_logic_tpa": ("cost", "sod_logic_tpa", float),
    "area.dense_total_tpa": ("cost", "dense_total_tpa", float),
    "area.sod_total_tpa": ("cost", "sod_total_tpa", float),
    "area.accumulator_fraction": ("cost", "accumulator_fraction", float),
    "power_gating.enabled": ("cost", "power_gating_enabled", _bool),
    "power_gating.domain_rows": ("cost", "domain_rows", int),
    "power_gating.domain_cols": ("cost", "domain_cols", int),
    "policy.weight": ("sim", "weight_policy", _policy),
    "policy.input": ("sim", "input_policy", _policy),
    "sim.exact_effective_macs": ("sim", "exact_effective_macs", _bool),
    "layer.M": ("layer", "M", int),
    "layer.K": ("layer", "K", int),
    "layer.N": ("layer", "N", int),
    "layer.input_density": ("layer", "input_density", float),
    "layer.name": ("layer", "name", str),
    "baseline.kernel_energy_penalty": ("baseline", "kernel_energy_penalty", float),
    "baseline.scnn.strided_util": ("baseline", "scnn_strided_util", float),
    "baseline.scnn.pe_grid": ("baseline", "scnn_pe_grid", int),
    "baseline.scnn.vector": ("baseline", "scnn_vector", int),
    "baseline.ese.reference_m": ("ese_ref", 0, int),
    "baseline.ese.reference_k": ("ese_ref", 1, int),
    "baseline.ese.reference_n": ("ese_ref", 2, int),
}

# baseline.<kind>[.<metric>].anchor.<i>.<density|ratio>; metric defaults to tpa
_ANCHOR = re.compile(r"baseline\.(ese|scnn|snap)(?:\.(tpa|energy))?\.anchor\.(\d+)\.(density|ratio)$")

DEFAULT_SWEEP_LAYER = LayerShape(512, 512, 512, 1.0, 1.0, name="sweep")


@dataclass(frozen=True)
class Setting:
    key: str
    value: str
    path: str | None = None
    line: int | None = None


def parse_lines(text: str, path: str | None = None) -> list[Setting]:
    out = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", path, n)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"empty key or value in {raw.strip()!r}", path, n)
        out.append(Setting(key, value, path, n))
    return out


def parse_file(path) -> list[Setting]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", str(path)) from None
    return parse_lines(text, str(path))


def parse_overrides(items) -> list[Setting]:
    out = []
    for i, item in enumerate(items or (), start=1):
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}", "--set", i)
        key, value = (s.strip() for s in item.split("=", 1))
        out.append(Setting(key, value, "--set", i))
    return out


@dataclass(frozen=True)
class Config:
    sim: SimConfig = field(default_factory=SimConfig)
    baseline: baselines.BaselineParams = field(default_factory=baselines.BaselineParams)
    sweep_layer: LayerShape = DEFAULT_SWEEP_LAYER


def build(settings: list[Setting]) -> Config:
    """Fold settings (later ones win) into validated config objects."""
    sections: dict[str, dict] = {s: {} for s in
                                 ("array", "bits", "buffer", "decomp", "cost", "sim", "layer", "baseline")}
    ese_ref = list(baselines.BaselineParams().ese_reference)
    anchors: dict[tuple[str, str, int], dict[str, float]] = {}
    where: dict[str, Setting] = {}
    for s in settings:
        where[s.key] = s
        m = _ANCHOR.match(s.key)
        try:
            if m:
                kind, metric, idx, what = m.group(1), m.group(2) or "tpa", int(m.group(3)), m.group(4)
                anchors.setdefault((kind, metric, idx), {})[what] = float(s.value)
                continue
            if s.key not in _FIELDS:
                raise ConfigError(f"unknown key {s.key!r}", s.path, s.line)
            section, name, parse = _FIELDS[s.key]
            value = parse(s.value)
        except ValueError as e:
            raise ConfigError(f"{s.key}: {e}", s.path, s.line) from None
        if section == "ese_ref":
            ese_ref[name] = value
        else:
            sections[section][name] = value

    def make(key_hint, fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except (ValueError, TypeError) as e:
            s = next((where[k] for k in where if k.startswith(key_hint)), None)
            raise ConfigError(str(e), s.path if s else None, s.line if s else None) from None

    bw = make("bits.", BitWidths, **sections["bits"])
    array = make("array.", ArrayConfig, bw=bw, **sections["array"])
    buf = make("buffer.", BufferConfig, **sections["buffer"])
    dc = make("decomp.", DecompConfig, **sections["decomp"])
    cp = make("energy.", cost.CostParams, **sections["cost"])
    sim = make("policy.", SimConfig, array=array, buffer=buf, decomp=dc, cost=cp, **sections["sim"])

    curves = baselines.default_curves()
    for (kind, metric, idx), upd in sorted(anchors.items()):
        curve = curves[kind][metric]
        s = where.get(f"baseline.{kind}.anchor.{idx}.density") or where.get(
            f"baseline.{kind}.{metric}.anchor.{idx}.density") or next(
            w for k, w in where.items() if k.startswith(f"baseline.{kind}"))
        if idx >= len(curve.anchors):
            raise ConfigError(f"{kind} {metric} curve has {len(curve.anchors)} anchors, no index {idx}",
                              s.path, s.line)
        curves[kind][metric] = make(f"baseline.{kind}", curve.with_anchor, idx,
                                    density=upd.get("density"), ratio=upd.get("ratio"))
    bp = make("baseline.", baselines.BaselineParams, curves=curves, ese_reference=tuple(ese_ref),
              **sections["baseline"])

    layer = make("layer.", replace, DEFAULT_SWEEP_LAYER, **sections["layer"])
    return Config(sim, bp, layer)


def load(path=None, overrides=()) -> Config:
    settings = parse_file(path) if path else []
    return build(settings + parse_overrides(overrides))
