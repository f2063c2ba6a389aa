import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pilotwave import io
from pilotwave.errors import GridError
from pilotwave.grid import GridSpec, RealField, WaveFunction

from conftest import gaussian


def test_snapshot_round_trip(tmp_path):
    g = GridSpec((0.0, -1.0), (1.0, 2.0), (16, 9), ("periodic", "reflecting"))
    rng = np.random.default_rng(0)
    psi = WaveFunction(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape), 1.25)
    p = tmp_path / "psi.pwl"
    io.write_snapshot(p, psi)
    assert p.read_bytes()[:4] == b"PWL1"
    back = io.read_snapshot(p)
    assert back.grid == g and back.time == 1.25
    assert np.array_equal(back.values, psi.values)


def test_snapshot_bad_magic():
    with pytest.raises(GridError):
        io.parse_snapshot(b"XXXX" + bytes(64))


@settings(max_examples=20, deadline=None)
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_snapshot_bytes_deterministic(re, im):
    g = GridSpec.uniform(0.0, 1.0, 8)
    psi = WaveFunction(g, np.full(8, complex(re, im)))
    assert io.snapshot_bytes(psi) == io.snapshot_bytes(io.parse_snapshot(io.snapshot_bytes(psi)))


def test_grid_csv_round_trip(tmp_path):
    g = GridSpec.uniform(-5.0, 5.0, 32)
    psi = gaussian(g, 0.3, 1.0, 0.7)
    p = tmp_path / "psi.csv"
    io.write_grid_csv(p, psi)
    assert p.read_text().splitlines()[0] == "i0,q0,re,im"
    assert np.array_equal(io.read_grid_csv(p, g), psi.values)


def test_potential_csv(tmp_path):
    g = GridSpec.uniform(-2.0, 2.0, 9, "reflecting")
    x = g.axis(0)
    p = tmp_path / "v.csv"
    io.write_grid_csv(p, WaveFunction(g, x**2))
    V = io.read_potential_csv(p, g)
    assert isinstance(V, RealField) and np.array_equal(V.values, x**2)


def test_csv_grid_mismatch(tmp_path):
    g = GridSpec.uniform(-5.0, 5.0, 16)
    p = tmp_path / "psi.csv"
    io.write_grid_csv(p, gaussian(g))
    with pytest.raises(GridError):
        io.read_grid_csv(p, GridSpec.uniform(-4.0, 4.0, 16))
    with pytest.raises(GridError):
        io.read_grid_csv(p, GridSpec.uniform(-5.0, 5.0, 8, dims=2))


def test_csv_missing_rows(tmp_path):
    g = GridSpec.uniform(-5.0, 5.0, 16)
    p = tmp_path / "psi.csv"
    io.write_grid_csv(p, gaussian(g))
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(GridError):
        io.read_grid_csv(p, g)
