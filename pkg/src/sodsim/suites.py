"""Benchmark layer sets and their per-layer densities.

Only each model's density range and mean are known, so per-layer values are
drawn by a seeded generator that hits the range end points and the mean
exactly. Weight means are weighted by parameter count and input means by
activation count, the way pruning results are usually reported. The
generated tables ship under ``data/`` and are regenerated bit-identically
by :func:`generate_densities`.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import UnknownModel
from .matcore import splitmix64
from .memsys import LayerShape
from .systolic import ConvGeometry

MODELS = ("alexnet-conv", "vgg16-conv", "bert-squad", "bert-mnli")
SUITE_SEED = 20240917


@dataclass(frozen=True)
class DensityTarget:
    lo: float
    hi: float
    mean: float
    pins: tuple[tuple[int, float], ...] = ()


@dataclass(frozen=True)
class BenchmarkSuite:
    model: str
    layers: tuple[LayerShape, ...]
    weight_target: DensityTarget
    input_target: DensityTarget


# -- layer shapes ----------------------------------------------------------------

def _conv(name, geom: ConvGeometry) -> LayerShape:
    M, K, N = geom.matmul_dims()
    return LayerShape(M, K, N, name=name, groups=geom.groups, conv=geom)


def alexnet_layers() -> list[LayerShape]:
    return [
        _conv("conv1", ConvGeometry(227, 227, 3, 96, 11, stride=4)),
        _conv("conv2", ConvGeometry(27, 27, 96, 256, 5, pad=2, groups=2)),
        _conv("conv3", ConvGeometry(13, 13, 256, 384, 3, pad=1)),
        _conv("conv4", ConvGeometry(13, 13, 384, 384, 3, pad=1, groups=2)),
        _conv("conv5", ConvGeometry(13, 13, 384, 256, 3, pad=1, groups=2)),
    ]


def vgg16_layers() -> list[LayerShape]:
    cfg = [(224, 3, 64), (224, 64, 64),
           (112, 64, 128), (112, 128, 128),
           (56, 128, 256), (56, 256, 256), (56, 256, 256),
           (28, 256, 512), (28, 512, 512), (28, 512, 512),
           (14, 512, 512), (14, 512, 512), (14, 512, 512)]
    names = ["conv1_1", "conv1_2", "conv2_1", "conv2_2", "conv3_1", "conv3_2", "conv3_3",
             "conv4_1", "conv4_2", "conv4_3", "conv5_1", "conv5_2", "conv5_3"]
    return [_conv(n, ConvGeometry(hw, hw, ci, co, 3, pad=1)) for n, (hw, ci, co) in zip(names, cfg)]


def bert_layers(seq_len: int, encoders: int = 12, hidden: int = 768, ffn: int = 3072) -> list[LayerShape]:
    out = []
    for e in range(encoders):
        for proj in ("query", "key", "value", "attn_out"):
            out.append(LayerShape(seq_len, hidden, hidden, name=f"enc{e}.{proj}"))
        out.append(LayerShape(seq_len, hidden, ffn, name=f"enc{e}.ffn_in"))
        out.append(LayerShape(seq_len, ffn, hidden, name=f"enc{e}.ffn_out"))
    return out


_SPECS = {
    # weight target, input target
    "alexnet-conv": (alexnet_layers, DensityTarget(0.34, 0.84, 0.41, ((0, 0.84),)),
                     DensityTarget(0.38, 1.0, 0.69, ((0, 1.0),))),
    "vgg16-conv": (vgg16_layers, DensityTarget(0.22, 0.57, 0.33, ((0, 0.57),)),
                   DensityTarget(0.31, 1.0, 0.61, ((0, 1.0),))),
    "bert-squad": (lambda: bert_layers(384), DensityTarget(0.04, 0.5, 0.33),
                   DensityTarget(1.0, 1.0, 1.0)),
    "bert-mnli": (lambda: bert_layers(128), DensityTarget(0.01, 0.22, 0.12),
                  DensityTarget(1.0, 1.0, 1.0)),
}


# -- density generation ----------------------------------------------------------

def generate_densities(weights, target: DensityTarget, seed: int) -> list[float]:
    """Per-layer densities in [lo, hi] whose ``weights``-weighted mean is ``mean``.

    Unpinned layers get ``lo + (hi - lo) * u**gamma`` for seeded uniforms u;
    one unpinned layer is forced to ``lo`` and one to ``hi`` unless a pin
    already covers that end, and gamma is bisected to land the mean.
    """
    w = np.asarray(weights, dtype=float)
    n = len(w)
    lo, hi = target.lo, target.hi
    if hi == lo:
        return [lo] * n
    z = splitmix64(seed, 0, 2 * n)
    u = (z[:n] >> np.uint64(11)).astype(float) / float(1 << 53)
    order = [int(i) for i in np.argsort(z[n:], kind="stable")]

    fixed = dict(target.pins)
    free = [i for i in order if i not in fixed]
    if hi not in fixed.values():
        fixed[free.pop(0)] = hi
    if lo not in fixed.values():
        fixed[free.pop(0)] = lo
    if not free:
        raise ValueError("no free layers left to match the mean")

    def build(gamma):
        x = np.empty(n)
        for i, v in fixed.items():
            x[i] = v
        x[free] = lo + (hi - lo) * u[free] ** gamma
        return x

    def mean(gamma):
        return float(np.dot(w, build(gamma)) / w.sum())

    g_lo, g_hi = 1e-4, 1e4
    if not mean(g_hi) <= target.mean <= mean(g_lo):
        raise ValueError(f"mean {target.mean} unreachable within [{lo}, {hi}] with given pins")
    for _ in range(200):
        mid = (g_lo * g_hi) ** 0.5
        if mean(mid) > target.mean:
            g_lo = mid
        else:
            g_hi = mid
    return [float(v) for v in build((g_lo * g_hi) ** 0.5)]


def weight_count(layer: LayerShape) -> int:
    return layer.K * layer.N * layer.groups


def activation_count(layer: LayerShape) -> int:
    g = layer.conv
    if g is None:
        return layer.M * layer.K
    return g.in_h * g.in_w * g.in_ch


def density_table(model: str, seed: int = SUITE_SEED) -> list[tuple[str, float, float]]:
    layers_fn, wt, it = _spec(model)
    layers = layers_fn()
    wd = generate_densities([weight_count(l) for l in layers], wt, seed)
    idn = generate_densities([activation_count(l) for l in layers], it, seed + 1)
    return [(l.name, round(a, 4), round(b, 4)) for l, a, b in zip(layers, wd, idn)]


def _spec(model: str):
    try:
        return _SPECS[model]
    except KeyError:
        raise UnknownModel(f"unknown model {model!r}; choose from {', '.join(MODELS)}") from None


def table_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["layer", "weight_density", "input_density"])
    for name, a, b in rows:
        wr.writerow([name, f"{a:.4f}", f"{b:.4f}"])
    return buf.getvalue()


def load_table(model: str) -> list[tuple[str, float, float]]:
    _spec(model)
    text = resources.files("sodsim.data").joinpath(f"{model}.csv").read_text()
    rd = csv.DictReader(io.StringIO(text))
    return [(r["layer"], float(r["weight_density"]), float(r["input_density"])) for r in rd]


def load_suite(model: str) -> BenchmarkSuite:
    layers_fn, wt, it = _spec(model)
    table = {name: (a, b) for name, a, b in load_table(model)}
    layers = tuple(l.with_densities(*table[l.name]) for l in layers_fn())
    return BenchmarkSuite(model, layers, wt, it)
