import pytest

from sodsim.config import build, load, parse_lines, parse_overrides
from sodsim.errors import ConfigError


def test_defaults():
    cfg = load()
    assert cfg.sim.array.pe_rows == 64
    assert cfg.sim.buffer.capacity_bytes == 2 * 2 ** 20
    assert (cfg.sweep_layer.M, cfg.sweep_layer.K, cfg.sweep_layer.N) == (512, 512, 512)


def test_parse_comments_and_blank_lines():
    s = parse_lines("# header\n\narray.rows = 32  # trailing\n", "f.cfg")
    assert [(x.key, x.value, x.line) for x in s] == [("array.rows", "32", 3)]


def test_file_and_overrides(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("array.rows = 32\narray.cols = 32\nenergy.dram_pj_per_bit = 20\n")
    cfg = load(p, ["array.rows=16", "power_gating.enabled=yes"])
    assert cfg.sim.array.pe_rows == 16
    assert cfg.sim.array.pe_cols == 32
    assert cfg.sim.cost.e_dram_bit == 20.0
    assert cfg.sim.cost.power_gating_enabled


def test_unknown_key_location(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("array.rows = 32\n\narray.colz = 4\n")
    with pytest.raises(ConfigError) as e:
        load(p)
    assert e.value.line == 3
    assert str(p) in str(e.value)


def test_bad_value_location():
    with pytest.raises(ConfigError) as e:
        build(parse_lines("array.rows = many", "x.cfg"))
    assert e.value.line == 1


def test_missing_equals():
    with pytest.raises(ConfigError):
        parse_lines("array.rows 32")
    with pytest.raises(ConfigError):
        parse_overrides(["array.rows"])


def test_constructor_errors_become_config_errors():
    with pytest.raises(ConfigError):
        load(overrides=["buffer.weight_fraction=0.9"])
    with pytest.raises(ConfigError):
        load(overrides=["policy.weight=zip"])
    with pytest.raises(ConfigError):
        load(overrides=["layer.input_density=2"])


def test_anchor_overrides():
    cfg = load(overrides=["baseline.ese.anchor.1.ratio=1.1", "baseline.scnn.energy.anchor.0.ratio=1.05"])
    curves = cfg.baseline.curves
    assert curves["ese"]["tpa"].anchors[1] == (0.2, 1.1)
    assert curves["scnn"]["energy"].anchors[0] == (0.3, 1.05)
    with pytest.raises(ConfigError):
        load(overrides=["baseline.ese.anchor.5.ratio=1.0"])
    with pytest.raises(ConfigError):
        load(overrides=["baseline.snap.anchor.1.density=0.05"])


def test_layer_and_reference_keys():
    cfg = load(overrides=["layer.M=64", "layer.name=fc", "baseline.ese.reference_m=32"])
    assert cfg.sweep_layer.M == 64 and cfg.sweep_layer.name == "fc"
    assert cfg.baseline.ese_reference == (32, 768, 768)
