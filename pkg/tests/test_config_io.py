import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from critwave import config as cfgmod
from critwave import io
from critwave.cli import bundled_config
from critwave.config import ConfigError, RunConfig
from critwave.grid import RadialGrid, SpacetimeRecord

finite_pos = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False)


@given(amp=st.floats(min_value=0, max_value=10, allow_nan=False),
       r0=st.floats(min_value=0.1, max_value=2.0),
       cfl=st.floats(min_value=0.05, max_value=0.9),
       tol=finite_pos,
       variant=st.sampled_from(["linear", "massless", "full_exponential", "massive_no_cubic"]))
def test_dump_parse_round_trip(amp, r0, cfl, tol, variant):
    cfg = RunConfig(variant=variant, data_amplitude=amp, data_r0=r0, integrator_cfl=cfl,
                    verify_energy_tol=tol, grid_R_max=30.0, t_final=10.0,
                    verify_suites=("energy", "ledger"))
    back = cfgmod.loads(cfgmod.dumps(cfg))
    assert back == cfg
    assert cfgmod.dumps(back) == cfgmod.dumps(cfg)


@pytest.mark.parametrize("name", ["small_data", "standard", "scattering"])
def test_bundled_configs_parse(name):
    cfg = cfgmod.loads(bundled_config(name))
    assert cfg.output_dir == name
    assert cfg.verify_suites


def test_comments_and_blank_lines():
    cfg = cfgmod.loads("# header\n\nt_final = 5.0  # short\ngrid.R_max = 8\n")
    assert cfg.t_final == 5.0 and cfg.grid_R_max == 8.0


@pytest.mark.parametrize("text, fragment", [
    ("bogus.key = 1\n", "unknown key"),
    ("t_final = 1\nt_final = 2\n", "duplicate"),
    ("t_final 3\n", "key = value"),
    ("t_final = soon\n", "t_final"),
    ("scatter.T_star = 1, x\n", "scatter.T_star"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        cfgmod.loads(text)


@pytest.mark.parametrize("kw", [
    dict(variant="cubic"),
    dict(data_family="square"),
    dict(data_amplitude=-1.0),
    dict(data_amplitude=float("nan")),
    dict(grid_dr=0.0),
    dict(integrator_cfl=0.95),
    dict(grid_R_max=10.0),
    dict(conformal_d=1.0),
    dict(scatter_T_star=(25.0,)),
    dict(scatter_T_star=(5.3,)),
    dict(verify_suites=("energy", "everything")),
])
def test_validation_errors(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw)


def test_T_star_on_snapshot_grid_accepted():
    cfg = RunConfig(scatter_T_star=(5.5, 20.0))
    assert cfg.scatter_T_star == (5.5, 20.0)


def test_override():
    cfg = cfgmod.override(RunConfig(), "data.amplitude", "0.25")
    assert cfg.data_amplitude == 0.25
    with pytest.raises(ConfigError, match="unknown key"):
        cfgmod.override(cfg, "data.colour", "red")
    with pytest.raises(ConfigError):
        cfgmod.override(cfg, "grid.dr", "-1")


def test_file_round_trip(tmp_path):
    cfg = cfgmod.loads(bundled_config("small_data"))
    cfgmod.dump(cfg, tmp_path / "c.cfg")
    assert cfgmod.load(tmp_path / "c.cfg") == cfg


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_float_round_trips(x):
    assert float(io.fmt_float(x)) == x


def test_fmt_float_specials():
    assert io.fmt_float(float("nan")) == "nan"
    assert io.fmt_float(float("inf")) == "inf"
    assert io.fmt_float(-float("inf")) == "-inf"


def test_csv_round_trip(tmp_path, rng):
    rows = rng.standard_normal((7, 3)).tolist()
    io.write_csv(tmp_path / "a.csv", ("x", "y", "z"), rows)
    header, data = io.read_csv(tmp_path / "a.csv")
    assert header == ["x", "y", "z"]
    assert np.array_equal(data, np.array(rows))
    with pytest.raises(ValueError, match="fields"):
        io.write_csv(tmp_path / "b.csv", ("x", "y"), [[1.0, 2.0, 3.0]])


def test_empty_csv(tmp_path):
    io.write_csv(tmp_path / "e.csv", io.CONFORMAL_COLUMNS, [])
    header, data = io.read_csv(tmp_path / "e.csv")
    assert tuple(header) == io.CONFORMAL_COLUMNS and data.shape == (0, len(header))


def _record(rng, n=11, ns=4):
    return SpacetimeRecord(RadialGrid(1 / 16, n), 0.25, np.arange(ns) * 0.25,
                           rng.standard_normal((ns, n)), rng.standard_normal((ns, n)))


def test_record_round_trip(tmp_path, rng):
    rec = _record(rng)
    io.write_record(tmp_path / "r.bin", rec)
    back = io.read_record(tmp_path / "r.bin")
    assert back.grid.n_cells == 11 and back.grid.dr == 1 / 16 and back.dt_rec == 0.25
    assert np.array_equal(back.times, rec.times)
    assert np.array_equal(back.u, rec.u) and np.array_equal(back.w, rec.w)


def test_record_rejects_bad_files(tmp_path, rng):
    io.write_record(tmp_path / "r.bin", _record(rng))
    raw = (tmp_path / "r.bin").read_bytes()
    (tmp_path / "bad.bin").write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(ValueError, match="not a record"):
        io.read_record(tmp_path / "bad.bin")
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="bytes"):
        io.read_record(tmp_path / "short.bin")


def test_write_json_handles_numpy_and_nonfinite(tmp_path):
    obj = {"a": np.float64(1.5), "b": np.int64(3), "c": np.array([1.0, np.nan]),
           "d": float("inf"), "e": np.bool_(True), 2: (1, 2)}
    io.write_json(tmp_path / "s.json", obj)
    d = json.loads((tmp_path / "s.json").read_text())
    assert d == {"a": 1.5, "b": 3, "c": [1.0, "nan"], "d": "inf", "e": True, "2": [1, 2]}
    assert not math.isnan(d["a"])
