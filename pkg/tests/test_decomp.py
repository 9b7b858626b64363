import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sodsim.decomp import DecompConfig, column_lengths, load_pointers, simulate_decompression, tile_cycles
from sodsim.errors import MalformedCsc
from sodsim.matcore import DenseMatrix, csc_decode, csc_encode, random_matrix


def test_load_pointers_examples():
    cfg = DecompConfig()
    assert load_pointers(64, cfg) == 5
    assert load_pointers(255, cfg) == 16
    assert load_pointers(15, cfg) == 1


def test_column_lengths():
    assert column_lengths([0, 2, 2, 5]).tolist() == [2, 0, 3]
    with pytest.raises(MalformedCsc):
        column_lengths([0, 3, 1])


def test_example_73_cycles():
    m = DenseMatrix(np.where(np.arange(4096) < 410, 1, 0).reshape(64, 64))
    tr = simulate_decompression(csc_encode(m))
    assert tr.cycles_total == 73
    assert tr.cycles_stalled == 0
    assert tr.pointer_cycles == 5
    assert tr.fetch_cycles == 7
    assert tile_cycles(64, 64, 410, DecompConfig()) == 73


def test_fully_dense_tile():
    m = random_matrix(64, 64, 1.0, seed=4)
    tr = simulate_decompression(csc_encode(m))
    assert tr.cycles_stalled == 0
    assert tr.dense_out == m
    assert tr.nz_words_read == 4096
    assert tr.ptr_words_read == 65


def test_narrow_fetch_stalls():
    # fetching slower than the dense feed starves emission on dense data
    m = random_matrix(64, 64, 1.0, seed=4)
    tr = simulate_decompression(csc_encode(m), DecompConfig(nz_fetch_width=16))
    assert tr.cycles_stalled > 0
    assert tr.dense_out == m


@settings(max_examples=150, deadline=None)
@given(rows=st.integers(1, 256), cols=st.integers(1, 80),
       density=st.floats(0, 1), seed=st.integers(0, 2 ** 32))
def test_equivalence_and_no_stall(rows, cols, density, seed):
    m = random_matrix(rows, cols, density, seed)
    c = csc_encode(m)
    cfg = DecompConfig()
    tr = simulate_decompression(c, cfg)
    assert tr.dense_out == csc_decode(c)
    assert tr.cycles_stalled == 0
    assert tr.cycles_total == tile_cycles(rows, cols, c.nnz, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        DecompConfig(nz_fetch_width=0)
    with pytest.raises(ValueError):
        DecompConfig(pipeline_latency=-1)
