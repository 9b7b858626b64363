"""Comparison engines: the dense accelerator and analytic sparse baselines.

The dense baseline is simulated exactly like the sparse-on-dense design but
stores and moves everything densely and has no decompression hardware.

ESE, SCNN and SNAP are not simulated. Each is a pair of curves giving its
throughput/area and energy-efficiency relative to sparse-on-dense as a
function of density, passing exactly through measured anchor points. To
price a whole layer, a baseline's absolute efficiency at density d is taken
from a sparse-on-dense run of a reference layer at d divided by the curve,
so baselines keep their own (reuse-independent) cost per operation while
sparse-on-dense is re-simulated for the actual layer shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import engine
from .cost import MetricsPoint
from .memsys import LayerShape
from .systolic import ConvGeometry

ENGINES = ("sod", "dense", "ese", "scnn", "snap")
ANALYTIC = ("ese", "scnn", "snap")

INVERSE = "inverse"   # a/d + b through two anchors
LINEAR = "linear"     # piecewise linear through the anchors

SOD_OVER_BASE = "sod_over_baseline"
BASE_OVER_SOD = "baseline_over_sod"


HOLD = "hold"          # below the first anchor keep its value
EXTEND = "extend"      # extend the first segment linearly, bounded below by ``floor``
SCALE = "scale"        # below the first anchor the baseline's metric grows as 1/d


@dataclass(frozen=True)
class BaselineCurve:
    """Sparse-on-dense advantage over one baseline for one metric.

    ``anchors`` are (density, value) pairs; ``quantity`` says whether values
    are SoD/baseline or baseline/SoD. Above the last anchor linear curves
    hold their last value. Below the first anchor ``low`` decides: the
    inverse rule keeps its formula unless ``low`` is SCALE, which models an
    engine whose work is proportional to the nonzeros it touches.
    """
    kind: str
    metric: str                          # "tpa" or "energy"
    anchors: tuple[tuple[float, float], ...]
    rule: str = LINEAR
    quantity: str = SOD_OVER_BASE
    low: str | None = None
    floor: float = 0.05

    def __post_init__(self):
        if len(self.anchors) < 2:
            raise ValueError(f"{self.kind}.{self.metric}: need at least two anchors")
        ds = [d for d, _ in self.anchors]
        if any(b <= a for a, b in zip(ds, ds[1:])):
            raise ValueError(f"{self.kind}.{self.metric}: anchor densities must increase")
        if any(v <= 0 for _, v in self.anchors) or ds[0] <= 0:
            raise ValueError(f"{self.kind}.{self.metric}: anchors must be positive")
        if self.rule not in (INVERSE, LINEAR):
            raise ValueError(f"unknown interpolation rule {self.rule!r}")
        if self.rule == INVERSE and len(self.anchors) != 2:
            raise ValueError("inverse rule takes exactly two anchors")
        if self.low not in (None, HOLD, EXTEND, SCALE):
            raise ValueError(f"unknown low-density rule {self.low!r}")

    @property
    def first_density(self) -> float:
        return self.anchors[0][0]

    @property
    def coefficients(self) -> tuple[float, float]:
        """(alpha, beta) of the inverse rule."""
        (d0, v0), (d1, v1) = self.anchors
        alpha = (v0 - v1) / (1 / d0 - 1 / d1)
        return alpha, v0 - alpha / d0

    def _raw(self, density: float) -> float:
        if self.rule == INVERSE:
            a, b = self.coefficients
            return a / density + b
        ds = [d for d, _ in self.anchors]
        vs = [v for _, v in self.anchors]
        if density <= ds[0]:
            if self.low == EXTEND:
                slope = (vs[1] - vs[0]) / (ds[1] - ds[0])
                return max(self.floor, vs[0] + slope * (density - ds[0]))
            return vs[0]
        if density >= ds[-1]:
            return vs[-1]
        for (d0, v0), (d1, v1) in zip(self.anchors, self.anchors[1:]):
            if d0 <= density <= d1:
                return v0 + (v1 - v0) * (density - d0) / (d1 - d0)
        raise AssertionError("unreachable")

    def value(self, density: float) -> float:
        if density <= 0:
            raise ValueError(f"{self.kind} model undefined at density {density}")
        d0 = self.first_density
        if density < d0 and self.low in (HOLD, SCALE):
            v0 = self._raw(d0)
            if self.low == HOLD:
                return v0
            # baseline metric * d0/d against a flat SoD metric
            adv = self._as_advantage(v0) * density / d0
            return self._from_advantage(adv)
        return self._raw(density)

    def _as_advantage(self, v: float) -> float:
        return v if self.quantity == SOD_OVER_BASE else 1.0 / v

    _from_advantage = _as_advantage

    def sod_advantage(self, density: float) -> float:
        return self._as_advantage(self.value(density))

    def baseline_metric(self, density: float, sod_metric) -> float:
        """Absolute baseline metric given ``sod_metric(d)``, SoD's metric at d.

        Under SCALE the baseline's metric below the first anchor is pinned to
        its value at that anchor times d0/d, whatever SoD does there.
        """
        d0 = self.first_density
        if density < d0 and self.low == SCALE:
            return sod_metric(d0) / self._as_advantage(self._raw(d0)) * d0 / density
        return sod_metric(density) / self.sod_advantage(density)

    def with_anchor(self, i: int, density=None, ratio=None) -> "BaselineCurve":
        pts = list(self.anchors)
        d, v = pts[i]
        pts[i] = (d if density is None else density, v if ratio is None else ratio)
        return replace(self, anchors=tuple(pts))


@dataclass(frozen=True)
class Ratios:
    density: float
    sod_tpa_advantage: float
    sod_energy_advantage: float

    @property
    def tpa_ratio(self) -> float:
        """Baseline throughput/area over sparse-on-dense."""
        return 1.0 / self.sod_tpa_advantage

    @property
    def energy_ratio(self) -> float:
        return 1.0 / self.sod_energy_advantage


def default_curves() -> dict[str, dict[str, BaselineCurve]]:
    return {
        "ese": {
            "tpa": BaselineCurve("ese", "tpa", ((0.1, 1.8), (0.2, 1.0)), INVERSE, BASE_OVER_SOD),
            "energy": BaselineCurve("ese", "energy", ((0.1, 2.4), (0.33, 1.4)), INVERSE, SOD_OVER_BASE,
                                     low=SCALE),
        },
        "scnn": {
            "tpa": BaselineCurve("scnn", "tpa", ((0.3, 3.1), (0.7, 5.8))),
            "energy": BaselineCurve("scnn", "energy", ((0.3, 1.0), (0.7, 1.1))),
        },
        "snap": {
            "tpa": BaselineCurve("snap", "tpa", ((0.1, 1.0), (0.3, 2.2), (0.7, 4.2)), low=EXTEND),
            "energy": BaselineCurve("snap", "energy", ((0.3, 0.9), (0.7, 1.1))),
        },
    }


def _ratios(kind: str, density: float, curves=None) -> Ratios:
    if density <= 0:
        raise ValueError(f"{kind} model undefined at density {density}")
    c = (curves or default_curves())[kind]
    return Ratios(density, c["tpa"].sod_advantage(density), c["energy"].sod_advantage(density))


def ese_model(density: float, curves=None) -> Ratios:
    return _ratios("ese", density, curves)


def scnn_model(density: float, curves=None) -> Ratios:
    return _ratios("scnn", density, curves)


def snap_model(density: float, curves=None) -> Ratios:
    return _ratios("snap", density, curves)


MODEL_FNS = {"ese": ese_model, "scnn": scnn_model, "snap": snap_model}


# -- layer-level baseline pricing ------------------------------------------------

@dataclass(frozen=True)
class BaselineParams:
    curves: dict = field(default_factory=default_curves)
    # ESE multiplies sparse weights by dense vectors in small batches; its
    # cost per op is that of SoD on this small-batch layer over the curve
    ese_reference: tuple[int, int, int] = (64, 768, 768)
    # SCNN/SNAP are priced against a 1x1 convolution over a large plane
    cnn_reference: ConvGeometry = ConvGeometry(56, 56, 256, 256, 1)
    scnn_pe_grid: int = 8
    scnn_vector: int = 4
    scnn_strided_util: float = 0.18
    # the CNN curves were measured with 1x1 kernels; larger kernels let SoD
    # reuse psums within each dot product, which the baselines cannot
    kernel_energy_penalty: float = 0.33


def curve_density(kind: str, layer: LayerShape) -> float:
    """Density at which a layer is read off a baseline's curve.

    The curves were measured on the density sweep, where weights have density
    d and inputs are dense, so d is the fraction of nonzero operand pairs. A
    layer maps to the sweep point with the same pair fraction.
    """
    return layer.weight_density * layer.input_density


def reference_layer(kind: str, density: float, params: BaselineParams) -> LayerShape:
    if kind == "ese":
        M, K, N = params.ese_reference
        return LayerShape(M, K, N, density, 1.0, name="ese-reference")
    g = params.cnn_reference
    M, K, N = g.matmul_dims()
    return LayerShape(M, K, N, density, 1.0, name=f"{kind}-reference", conv=g)


def scnn_utilization(conv: ConvGeometry | None, input_density: float, params: BaselineParams) -> float:
    """Multiplier utilization of SCNN's planar-tiled Cartesian-product PEs.

    Each PE of a ``grid x grid`` array owns one planar tile of the output and
    multiplies ``vector``-wide groups of nonzero activations per channel; the
    ragged last tile row/column and partly filled vectors idle multipliers.
    Strided layers waste most products and run at a fixed utilization.
    """
    if conv is None:
        return 1.0
    if conv.stride > 1:
        return params.scnn_strided_util
    grid, vec = params.scnn_pe_grid, params.scnn_vector
    tiles_h = math.ceil(conv.out_h / grid)
    tiles_w = math.ceil(conv.out_w / grid)
    planar = (conv.out_h / (grid * tiles_h)) * (conv.out_w / (grid * tiles_w))
    per_pe = tiles_h * tiles_w * input_density
    fill = per_pe / (vec * math.ceil(per_pe / vec)) if per_pe > 0 else 0.0
    return planar * fill


def kernel_energy_factor(conv: ConvGeometry | None, params: BaselineParams) -> float:
    """Baseline energy per op on a k x k kernel relative to 1x1.

    The penalty applies to the share of products (1 - 1/k^2) whose psums a
    1x1 characterization never had to move.
    """
    if conv is None or conv.kernel <= 1:
        return 1.0
    return 1.0 + params.kernel_energy_penalty * (1.0 - 1.0 / conv.kernel ** 2)


def price(kind: str, density: float, sod_at, params: BaselineParams) -> tuple[float, float, float]:
    """Baseline (tpa_logic, tpa_total, energy_eff) at ``density``.

    ``sod_at(d)`` returns the SoD MetricsPoint the baseline is measured
    against at density d.
    """
    if density <= 0:
        raise ValueError(f"{kind} model undefined at density {density}")
    curves = params.curves[kind]
    tpa = curves["tpa"]
    tl = tpa.baseline_metric(density, lambda d: sod_at(d).tpa_logic)
    tt = tpa.baseline_metric(density, lambda d: sod_at(d).tpa_total)
    eff = curves["energy"].baseline_metric(density, lambda d: sod_at(d).energy_eff)
    return tl, tt, eff


def analytic_point(kind: str, layer: LayerShape, tpa_logic: float, tpa_total: float,
                   eff: float) -> MetricsPoint:
    # analytic engines report efficiency only; event counts stay empty
    return MetricsPoint(
        engine=kind, layer=layer.name,
        density_w=layer.weight_density, density_i=layer.input_density,
        cycles=None, compute_cycles=None, dram_bits=None, sram_bits=None,
        mapped_macs=None, effective_macs=None, mapping_util=None, effective_util=None,
        raw_tops=None, effective_tops=None,
        tpa_logic=tpa_logic, tpa_total=tpa_total,
        energy_joules=layer.dense_ops / eff, energy_eff=eff,
        dense_ops=layer.dense_ops,
    )


def sweep_point(kind: str, layer: LayerShape, sod_at, params: BaselineParams | None = None) -> MetricsPoint:
    """Baseline on a sweep layer, read off its curve against SoD on the same layer.

    ``sod_at(d)`` runs SoD on ``layer`` at density d.
    """
    params = params or BaselineParams()
    d = curve_density(kind, layer)
    return analytic_point(kind, layer, *price(kind, d, sod_at, params))


def dense_baseline_run(layer: LayerShape, cfg: engine.SimConfig | None = None, seed: int = 0) -> MetricsPoint:
    return engine.run_layer(layer, engine.DENSE_ENGINE, cfg, seed)


def sod_run(layer: LayerShape, cfg: engine.SimConfig | None = None, seed: int = 0) -> MetricsPoint:
    return engine.run_layer(layer, engine.SOD, cfg, seed)


def benchmark_point(kind: str, layer: LayerShape, cfg: engine.SimConfig | None = None,
                    params: BaselineParams | None = None, seed: int = 0) -> MetricsPoint:
    """Baseline on a benchmark layer.

    The baseline's cost per operation comes from its curve against SoD on the
    baseline's reference layer, so it does not inherit SoD's shape-dependent
    reuse. SCNN is further scaled by its multiplier utilization on this layer
    relative to the reference, and the CNN engines pay extra energy for
    kernels larger than the 1x1 they were characterized on.
    """
    params = params or BaselineParams()
    d = curve_density(kind, layer)

    def sod_at(x):
        return sod_run(reference_layer(kind, x, params), cfg, seed)

    tl, tt, eff = price(kind, d, sod_at, params)
    if kind == "scnn":
        u = (scnn_utilization(layer.conv, layer.input_density, params)
             / scnn_utilization(params.cnn_reference, 1.0, params))
        tl, tt = tl * u, tt * u
    if kind in ("scnn", "snap"):
        eff /= kernel_energy_factor(layer.conv, params)
    return analytic_point(kind, layer, tl, tt, eff)
