import numpy as np
import pytest

from fellerlab import Field, Grid, ShiftPath, sample_white_noise
from fellerlab.storage import (manifest_digest, parse_config_text, read_field,
                               read_noise_path, read_shift_path, write_field,
                               write_manifest, write_path)


def test_field_round_trip(tmp_path):
    grid = Grid(dim=2, n=16, extent=(1.0, 2.0))
    rng = np.random.default_rng(0)
    f = Field(grid, rng.normal(size=(3, 16, 16)))
    p = tmp_path / "f.flb"
    write_field(p, f)
    back = read_field(p)
    assert back.grid == grid
    assert np.array_equal(back.values, f.values)


def test_field_header_bytes(tmp_path):
    grid = Grid(dim=1, n=8, extent=(1.0,))
    p = tmp_path / "f.flb"
    write_field(p, Field.zeros(grid))
    raw = p.read_bytes()
    assert raw[:4] == b"FLB1"
    assert len(raw) == 4 + 8 + 4 + 8 + 8 * 8


def test_bad_magic_rejected(tmp_path):
    p = tmp_path / "bad.flb"
    p.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError):
        read_field(p)


def test_noise_path_round_trip(tmp_path):
    grid = Grid(dim=1, n=16, extent=(1.0,))
    w = sample_white_noise(grid, 2, 64, 2.0**-6, seed=1)
    p = tmp_path / "w.flb"
    write_path(p, w)
    back = read_noise_path(p)
    assert back.dt == w.dt and back.n_steps == 64
    assert np.array_equal(back.increments, w.increments)


def test_shift_path_round_trip(tmp_path):
    grid = Grid(dim=1, n=16, extent=(1.0,))
    rng = np.random.default_rng(2)
    h = ShiftPath(grid, 2.0**-6, rng.normal(size=(64, 1, 16)))
    p = tmp_path / "h.flb"
    write_path(p, h)
    back = read_shift_path(p)
    assert np.array_equal(back.values, h.values)


def test_parse_config_text():
    cfg = parse_config_text("""
    # comment line
    grid.n = 64
    equation.kind = she1d   # trailing comment
    time.dt = 0.001
    """)
    assert cfg == {"grid.n": "64", "equation.kind": "she1d", "time.dt": "0.001"}


def test_parse_config_rejects_bad_lines():
    with pytest.raises(ValueError):
        parse_config_text("just some words\n")
    with pytest.raises(ValueError):
        parse_config_text("nodots = 3\n")


def test_manifest_digest_ignores_wall_clock(tmp_path):
    base = {"config": {"grid.n": "64"}, "seed": 7, "alive": True}
    a = dict(base, wall_clock_s=1.0)
    b = dict(base, wall_clock_s=99.0)
    assert manifest_digest(a) == manifest_digest(b)
    written = write_manifest(tmp_path / "m.json", a)
    assert written["digest"] == manifest_digest(b)


def test_manifest_digest_sensitive_to_content():
    a = {"config": {"grid.n": "64"}, "seed": 7}
    b = {"config": {"grid.n": "32"}, "seed": 7}
    assert manifest_digest(a) != manifest_digest(b)
