import numpy as np
import pytest
from hypothesis import given, strategies as st

from sodsim.baselines import (BASE_OVER_SOD, EXTEND, INVERSE, SCALE, BaselineCurve, BaselineParams,
                              benchmark_point, curve_density, default_curves, ese_model,
                              kernel_energy_factor, scnn_model, scnn_utilization, snap_model, sweep_point)
from sodsim.engine import SOD, run_layer
from sodsim.memsys import LayerShape
from sodsim.systolic import ConvGeometry


def test_ese_tpa_anchors_and_formula():
    assert ese_model(0.1).tpa_ratio == pytest.approx(1.8, abs=1e-12)
    assert ese_model(0.2).tpa_ratio == pytest.approx(1.0, abs=1e-12)
    assert ese_model(0.4).tpa_ratio == pytest.approx(0.6)
    assert ese_model(0.4).sod_tpa_advantage == pytest.approx(1 / 0.6)
    a, b = default_curves()["ese"]["tpa"].coefficients
    assert (a, b) == (pytest.approx(0.16), pytest.approx(0.2))


def test_ese_energy_anchors():
    assert ese_model(0.1).sod_energy_advantage == pytest.approx(2.4, abs=1e-12)
    assert ese_model(0.33).sod_energy_advantage == pytest.approx(1.4, abs=1e-12)


@given(d=st.floats(0.05, 1.0))
def test_sod_energy_never_below_ese(d):
    assert ese_model(d).sod_energy_advantage >= 1.0


def test_ese_energy_scales_below_first_anchor():
    # the baseline's efficiency keeps growing as 1/d below 0.1
    assert ese_model(0.05).sod_energy_advantage == pytest.approx(1.2)


def test_scnn_anchors():
    assert scnn_model(0.3).sod_tpa_advantage == pytest.approx(3.1)
    assert scnn_model(0.7).sod_tpa_advantage == pytest.approx(5.8)
    assert scnn_model(0.5).sod_tpa_advantage == pytest.approx(4.45)
    assert scnn_model(0.1).sod_tpa_advantage == pytest.approx(3.1)
    assert scnn_model(1.0).sod_tpa_advantage == pytest.approx(5.8)
    assert scnn_model(0.3).sod_energy_advantage == pytest.approx(1.0)
    assert scnn_model(0.7).sod_energy_advantage == pytest.approx(1.1)


def test_snap_anchors():
    assert snap_model(0.1).sod_tpa_advantage == pytest.approx(1.0)
    assert snap_model(0.3).sod_tpa_advantage == pytest.approx(2.2)
    assert snap_model(0.7).sod_tpa_advantage == pytest.approx(4.2)
    assert snap_model(0.5).sod_tpa_advantage == pytest.approx(3.2)
    # SNAP wins at extremely low density
    assert snap_model(0.05).sod_tpa_advantage < 1.0
    assert snap_model(0.001).sod_tpa_advantage == pytest.approx(1.0 - 6.0 * 0.099)
    assert BaselineCurve("x", "tpa", ((0.1, 1.0), (0.3, 5.0)), low=EXTEND).value(0.01) == 0.05
    assert snap_model(0.3).sod_energy_advantage == pytest.approx(0.9)
    assert snap_model(0.7).sod_energy_advantage == pytest.approx(1.1)


@pytest.mark.parametrize("fn", [ese_model, scnn_model, snap_model])
@pytest.mark.parametrize("d", [0.0, -0.1])
def test_domain_errors(fn, d):
    with pytest.raises(ValueError):
        fn(d)


def test_scnn_gap_grows():
    vals = [scnn_model(d).sod_tpa_advantage for d in np.linspace(0.3, 0.7, 41)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_curve_validation():
    with pytest.raises(ValueError):
        BaselineCurve("x", "tpa", ((0.1, 1.0),))
    with pytest.raises(ValueError):
        BaselineCurve("x", "tpa", ((0.3, 1.0), (0.2, 2.0)))
    with pytest.raises(ValueError):
        BaselineCurve("x", "tpa", ((0.1, -1.0), (0.2, 2.0)))
    with pytest.raises(ValueError):
        BaselineCurve("x", "tpa", ((0.1, 1.0), (0.2, 2.0), (0.3, 3.0)), INVERSE)


@given(pts=st.lists(st.tuples(st.floats(0.01, 1.0), st.floats(0.1, 10.0)), min_size=2, max_size=5,
                    unique_by=lambda p: round(p[0], 3)))
def test_linear_curves_pass_through_anchors(pts):
    pts = tuple(sorted(pts))
    c = BaselineCurve("x", "tpa", pts, low=EXTEND)
    for d, v in pts:
        assert c.value(d) == pytest.approx(v)


def test_with_anchor():
    c = default_curves()["ese"]["tpa"].with_anchor(1, ratio=1.2)
    assert c.value(0.2) == pytest.approx(1.2)
    assert c.quantity == BASE_OVER_SOD


def test_scale_rule_needs_sod_only_at_anchor():
    c = BaselineCurve("x", "energy", ((0.1, 2.0), (0.5, 1.0)), INVERSE, low=SCALE)
    seen = []
    m = c.baseline_metric(0.05, lambda d: seen.append(d) or 10.0)
    assert seen == [0.1]
    assert m == pytest.approx(10.0 / 2.0 * 2)


def test_curve_density_is_pair_fraction():
    assert curve_density("ese", LayerShape(1, 1, 1, 0.5, 0.4)) == pytest.approx(0.2)


def test_scnn_utilization():
    p = BaselineParams()
    assert scnn_utilization(None, 1.0, p) == 1.0
    assert scnn_utilization(ConvGeometry(227, 227, 3, 96, 11, stride=4), 1.0, p) == 0.18
    ref = p.cnn_reference
    # 7x7 outputs per PE: 49 activations in 4-wide vectors
    assert scnn_utilization(ref, 1.0, p) == pytest.approx(49 / 52)
    # 13x13 outputs on an 8x8 grid leave the last tile row and column ragged
    u = scnn_utilization(ConvGeometry(13, 13, 256, 384, 3, pad=1), 1.0, p)
    assert u == pytest.approx((13 / 16) ** 2)


def test_kernel_energy_factor():
    p = BaselineParams()
    assert kernel_energy_factor(None, p) == 1.0
    assert kernel_energy_factor(ConvGeometry(8, 8, 4, 4, 1), p) == 1.0
    assert kernel_energy_factor(ConvGeometry(8, 8, 4, 4, 3, pad=1), p) == pytest.approx(1 + 0.33 * 8 / 9)


def test_sweep_point_ratio_is_curve():
    layer = LayerShape(512, 512, 512, 0.4, 1.0, name="sweep")

    def sod_at(d):
        return run_layer(layer.with_densities(weight=d), SOD)

    pt = sweep_point("ese", layer, sod_at)
    sod = sod_at(0.4)
    assert pt.tpa_logic / sod.tpa_logic == pytest.approx(0.6)
    assert sod.energy_eff / pt.energy_eff == pytest.approx(ese_model(0.4).sod_energy_advantage)
    assert pt.cycles is None and pt.dense_ops == layer.dense_ops


def test_benchmark_point_fields():
    layer = LayerShape(128, 768, 768, 0.5, 1.0, name="fc")
    pt = benchmark_point("ese", layer)
    assert pt.engine == "ese" and pt.layer == "fc"
    assert pt.energy_joules * pt.energy_eff == pytest.approx(layer.dense_ops)
