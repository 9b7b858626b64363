import numpy as np
import pytest
from hypothesis import given, strategies as st

from sodsim.errors import UnknownModel
from sodsim.suites import (MODELS, DensityTarget, _spec, activation_count, density_table,
                           generate_densities, load_suite, load_table, weight_count)


@pytest.mark.parametrize("model", MODELS)
def test_shipped_tables_regenerate(model):
    assert load_table(model) == density_table(model)


@pytest.mark.parametrize("model", MODELS)
def test_ranges_and_means(model):
    suite = load_suite(model)
    wd = np.array([l.weight_density for l in suite.layers])
    idn = np.array([l.input_density for l in suite.layers])
    wt, it = suite.weight_target, suite.input_target
    assert wd.min() == pytest.approx(wt.lo) and wd.max() == pytest.approx(wt.hi)
    assert idn.min() == pytest.approx(it.lo) and idn.max() == pytest.approx(it.hi)
    w = np.array([weight_count(l) for l in suite.layers])
    a = np.array([activation_count(l) for l in suite.layers])
    # tables are stored to four decimals
    assert np.dot(w, wd) / w.sum() == pytest.approx(wt.mean, abs=1e-4)
    assert np.dot(a, idn) / a.sum() == pytest.approx(it.mean, abs=1e-4)


def test_layer_counts():
    assert len(load_suite("alexnet-conv").layers) == 5
    assert len(load_suite("vgg16-conv").layers) == 13
    conv1 = load_suite("alexnet-conv").layers[0]
    assert (conv1.M, conv1.K, conv1.N) == (3025, 363, 96)
    assert conv1.weight_density == 0.84


def test_unknown_model():
    with pytest.raises(UnknownModel):
        _spec("resnet")


@given(n=st.integers(3, 30), seed=st.integers(0, 2 ** 32), frac=st.floats(0.05, 0.95))
def test_generator_hits_targets(n, seed, frac):
    rng = np.random.default_rng(seed % 1000)
    w = rng.integers(1, 1000, size=n)
    lo, hi = 0.1, 0.9
    # pick a mean the free layers can reach given the two pinned end points
    mean = lo + (hi - lo) * frac
    pinned = (w[0] * hi + w[1] * lo) / w.sum()
    free_share = w[2:].sum() / w.sum()
    reach = (pinned + free_share * lo, pinned + free_share * hi)
    mean = min(max(mean, reach[0] + 1e-3), reach[1] - 1e-3)
    try:
        x = np.array(generate_densities(w, DensityTarget(lo, hi, mean), seed))
    except ValueError:
        return  # end points may land on heavy layers and push the mean out of reach
    assert x.min() == pytest.approx(lo) and x.max() == pytest.approx(hi)
    assert np.dot(w, x) / w.sum() == pytest.approx(mean, abs=1e-9)
    assert np.array_equal(x, generate_densities(w, DensityTarget(lo, hi, mean), seed))


def test_generator_unreachable_mean():
    with pytest.raises(ValueError):
        generate_densities([1, 1, 1], DensityTarget(0.1, 0.9, 0.95), 1)
