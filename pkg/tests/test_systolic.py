import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sodsim.errors import AccumulatorOverflow, TileTooLarge
from sodsim.matcore import BitWidths, DenseMatrix, random_matrix
from sodsim.systolic import (ArrayConfig, ConvGeometry, accumulate, effective_pairs, filters_to_matrix,
                             im2col, simulate_tile_matmul, tile_cycles, tiled_matmul, utilization)


def test_identity_example():
    w = random_matrix(4, 4, 0.8, seed=1)
    tr = simulate_tile_matmul(DenseMatrix(np.eye(4, dtype=int)), w)
    assert tr.out == DenseMatrix(w.data, 48)
    assert tr.cycles == 134


def test_cycle_formula_example():
    cfg = ArrayConfig()
    assert tile_cycles(128, 64, cfg) == 318
    tr = simulate_tile_matmul(random_matrix(128, 64, 0.5, 1), random_matrix(64, 64, 0.5, 2), cfg)
    assert tr.cycles == 318
    assert tr.mapped_macs == 524288


@settings(max_examples=60, deadline=None)
@given(m=st.integers(1, 40), k=st.integers(1, 16), n=st.integers(1, 16),
       di=st.floats(0, 1), dw=st.floats(0, 1), seed=st.integers(0, 2 ** 20))
def test_matches_brute_force_small_array(m, k, n, di, dw, seed):
    cfg = ArrayConfig(16, 16)
    a = random_matrix(m, k, di, seed)
    b = random_matrix(k, n, dw, seed + 1)
    tr = simulate_tile_matmul(a, b, cfg)
    assert np.array_equal(tr.out.data, a.data @ b.data)
    assert tr.cycles == k + m + 30


def test_tile_too_large():
    cfg = ArrayConfig(8, 8)
    with pytest.raises(TileTooLarge):
        simulate_tile_matmul(DenseMatrix.zeros(2, 9), DenseMatrix.zeros(9, 2), cfg)
    with pytest.raises(TileTooLarge):
        simulate_tile_matmul(DenseMatrix.zeros(2, 2), DenseMatrix.zeros(2, 9), cfg)
    with pytest.raises(ValueError):
        simulate_tile_matmul(DenseMatrix.zeros(2, 3), DenseMatrix.zeros(2, 2), cfg)


def test_split_k_accumulation():
    a = random_matrix(20, 150, 0.6, seed=3)
    b = random_matrix(150, 70, 0.4, seed=4)
    out, traces = tiled_matmul(a, b, ArrayConfig())
    assert np.array_equal(out.data, a.data @ b.data)
    assert len(traces) == 3 * 2


def test_psum_overflow():
    bw = BitWidths(psum_bits=20)
    cfg = ArrayConfig(8, 8, bw=bw)
    big = DenseMatrix(np.full((1, 8), 32767))
    with pytest.raises(AccumulatorOverflow):
        simulate_tile_matmul(big, DenseMatrix(np.full((8, 1), 32767)), cfg)
    part = DenseMatrix(np.full((1, 1), 2 ** 18), 20)
    with pytest.raises(AccumulatorOverflow):
        accumulate([part, part], bw)
    assert accumulate([part], bw).data[0, 0] == 2 ** 18


def test_worst_case_fits_default_psum():
    cfg = ArrayConfig()
    lo = DenseMatrix(np.full((1, 64), -32768))
    tr = simulate_tile_matmul(lo, DenseMatrix(lo.data.T), cfg)
    assert tr.out.data[0, 0] == 64 * 32768 ** 2


def test_utilization_fields():
    a = random_matrix(64, 64, 1.0, 5)
    b = random_matrix(64, 64, 0.5, 6)
    tr = simulate_tile_matmul(a, b)
    u = utilization(tr)
    assert u.mapping_util == pytest.approx(64 ** 3 / (4096 * tr.cycles))
    assert tr.effective_macs == effective_pairs(a.data != 0, b.data != 0) == 64 * b.nnz
    assert u.effective_util <= u.mapping_util


def test_effective_pairs_brute_force():
    rng = np.random.default_rng(0)
    x = rng.random((9, 7)) < 0.5
    w = rng.random((7, 5)) < 0.5
    brute = sum(int(x[i, k] and w[k, n]) for i in range(9) for k in range(7) for n in range(5))
    assert effective_pairs(x, w) == brute


def test_im2col_matches_direct_conv():
    rng = np.random.default_rng(1)
    x = rng.integers(-3, 4, size=(9, 9, 3))
    wt = rng.integers(-3, 4, size=(3, 3, 3, 4))
    out = im2col(x, 3, stride=2, pad=1) @ filters_to_matrix(wt)
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    ref = np.zeros((5, 5, 4), dtype=np.int64)
    for oy in range(5):
        for ox in range(5):
            patch = xp[2 * oy:2 * oy + 3, 2 * ox:2 * ox + 3, :]
            ref[oy, ox] = np.tensordot(patch, wt, axes=([0, 1, 2], [0, 1, 2]))
    assert np.array_equal(out.reshape(5, 5, 4), ref)


def test_conv_geometry():
    g = ConvGeometry(227, 227, 3, 96, 11, stride=4)
    assert g.matmul_dims() == (55 * 55, 363, 96)
