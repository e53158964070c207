import math
import struct

import numpy as np
import pytest

from selforg.grid import Grid2D, GridError, save_field, load_field

LAM = 2 * math.pi


def test_grid_contract():
    g = Grid2D(8 * LAM, 4 * LAM, 64, 32)
    assert g.dx == pytest.approx(LAM / 8)
    assert g.cell_area == pytest.approx(g.dx * g.dz)
    with pytest.raises(GridError, match="powers of two"):
        Grid2D(8 * LAM, 8 * LAM, 48, 64)
    with pytest.raises(GridError, match="wavelengths"):
        Grid2D(2 * LAM, 8 * LAM, 64, 64)
    with pytest.raises(GridError, match="coarser"):
        Grid2D(16 * LAM, 16 * LAM, 64, 64)
    g.require_encloses_cloud(4.0, 4.0)
    with pytest.raises(GridError, match="TF radii"):
        g.require_encloses_cloud(40.0, 4.0)


def test_wavenumbers_resolve_pump_momentum():
    g = Grid2D(4 * LAM, 4 * LAM, 32, 32)
    kx = g.kx().ravel()
    # the pump momentum (1 in units of k) must be on the grid exactly
    assert np.abs(kx - 1.0).min() < 1e-12
    assert np.abs(g.ksq()).max() == pytest.approx(2 * (np.pi / g.dx) ** 2, rel=1e-12)


def test_field_round_trip(tmp_path):
    g = Grid2D(4 * LAM, 8 * LAM, 32, 64)
    rng = np.random.default_rng(3)
    psi = rng.standard_normal((32, 64)) + 1j * rng.standard_normal((32, 64))
    path = tmp_path / "snap.fld"
    save_field(path, g, psi, 12345.0)
    g2, psi2, n = load_field(path)
    assert g2 == g
    assert n == 12345.0
    assert np.array_equal(psi2, psi)


def test_field_layout_x_fastest(tmp_path):
    # the payload must store x varying fastest (row-major over z rows)
    g = Grid2D(4 * LAM, 4 * LAM, 32, 32)
    psi = (np.arange(32)[:, None] + 1j * np.arange(32)[None, :]).astype(complex)
    path = tmp_path / "snap.fld"
    save_field(path, g, psi, 1.0)
    raw = path.read_bytes()
    header = struct.Struct("<8sI II ddd")
    payload = np.frombuffer(raw[header.size:], dtype=np.complex128)
    # element (ix, iz) sits at index iz*nx + ix
    assert payload[5 * 32 + 7] == psi[7, 5]
    assert payload[3] == psi[3, 0]


def test_field_errors(tmp_path):
    g = Grid2D(4 * LAM, 4 * LAM, 32, 32)
    with pytest.raises(ValueError, match="shape"):
        save_field(tmp_path / "x.fld", g, np.zeros((8, 8)), 1.0)
    bad = tmp_path / "bad.fld"
    bad.write_bytes(b"NOTMAGIC" + b"\0" * 64)
    with pytest.raises(ValueError, match="magic"):
        load_field(bad)
