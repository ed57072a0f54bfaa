import numpy as np
import pytest

from warmcloud.core import FIELDS, MoistState
from warmcloud.io import (CSV_COLUMNS, diagnostic_fields, read_checkpoint, write_checkpoint, write_csv_slices,
                          write_snapshot, write_vtk)
from warmcloud.velocity import AnalyticFlowSpec, analytic_velocity


def random_state(grid, rng, t=0.25):
    sh = grid.interior_shape
    return MoistState.from_interior(grid, t, T=rng.uniform(0.5, 1.5, sh), qv=rng.random(sh) * 0.02,
                                    qc=rng.random(sh) * 1e-3, qr=rng.random(sh) * 1e-3)


def test_checkpoint_round_trip_bitwise(tmp_path, small_grid, nd, rng):
    s = random_state(small_grid, rng)
    vel = analytic_velocity(AnalyticFlowSpec(amplitude=0.4), small_grid, 0.25)
    path = tmp_path / "a.chk"
    write_checkpoint(path, s, small_grid, vel)
    s2, g2, frames = read_checkpoint(path, nd)
    assert s2.t == s.t
    for name in FIELDS:
        assert s2.interior(name).tobytes() == s.interior(name).tobytes()
    assert g2.tbar.tobytes() == small_grid.tbar.tobytes()
    assert (g2.Lx, g2.Ly, g2.p0, g2.p1) == (small_grid.Lx, small_grid.Ly, small_grid.p0, small_grid.p1)
    t, (u, v, w) = frames[0]
    assert t == 0.25 and u.tobytes() == vel.u.tobytes() and w.tobytes() == vel.omega.tobytes()
    # writing again gives the same bytes
    write_checkpoint(tmp_path / "b.chk", s2, g2, vel)
    assert (tmp_path / "b.chk").read_bytes() == path.read_bytes()


def test_checkpoint_without_velocity(tmp_path, small_grid, rng):
    path = tmp_path / "a.chk"
    write_checkpoint(path, random_state(small_grid, rng), small_grid)
    _, _, frames = read_checkpoint(path)
    assert frames == []


@pytest.mark.parametrize("cut", [1, 100])
def test_truncated_checkpoint(tmp_path, small_grid, rng, cut):
    path = tmp_path / "a.chk"
    write_checkpoint(path, random_state(small_grid, rng), small_grid)
    path.write_bytes(path.read_bytes()[:-cut])
    with pytest.raises(ValueError, match="truncated"):
        read_checkpoint(path)


def test_trailing_bytes(tmp_path, small_grid, rng):
    path = tmp_path / "a.chk"
    write_checkpoint(path, random_state(small_grid, rng), small_grid)
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(ValueError, match="trailing"):
        read_checkpoint(path)


def test_vtk_layout(tmp_path, small_grid, nd, rng):
    path = tmp_path / "s.vtk"
    write_vtk(path, random_state(small_grid, rng), small_grid, nd)
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0")
    assert text.count("SCALARS") == 6
    for name in ("T", "qv", "qc", "qr", "theta", "rho"):
        assert f"SCALARS {name} double 1" in text
    assert f"DIMENSIONS {small_grid.nx} {small_grid.ny} {small_grid.n_p}" in text
    # each array holds one value per cell
    block = text.split("SCALARS T double 1\nLOOKUP_TABLE default\n")[1].split("SCALARS")[0]
    assert len(block.split()) == small_grid.nx * small_grid.ny * small_grid.n_p


def test_vtk_values_match_state(tmp_path, small_grid, nd, rng):
    s = random_state(small_grid, rng)
    path = tmp_path / "s.vtk"
    write_vtk(path, s, small_grid, nd)
    block = path.read_text().split("SCALARS qv double 1\nLOOKUP_TABLE default\n")[1].split("SCALARS")[0]
    vals = np.array(block.split(), dtype=float).reshape(small_grid.interior_shape)
    assert vals.tobytes() == s.interior("qv").tobytes()


def test_density_nan_for_nonpositive_T(small_grid, nd):
    s = MoistState.zeros(small_grid)
    d = diagnostic_fields(s, small_grid, nd)
    assert np.all(np.isnan(d["rho"])) and np.all(d["theta"] == 0)


def test_csv_constant_state(tmp_path, small_grid):
    s = MoistState.from_interior(small_grid, T=np.full(small_grid.interior_shape, 1.5))
    paths = write_csv_slices(tmp_path / "snap.csv", s, small_grid, levels=[0, 3])
    assert [p.name for p in paths] == ["snap_k000.csv", "snap_k003.csv"]
    lines = paths[1].read_text().splitlines()
    assert lines[0].split(",") == CSV_COLUMNS
    assert len(lines) == 1 + small_grid.nx * small_grid.ny
    row = lines[1].split(",")
    assert float(row[4]) == small_grid.p[3] and row[5:] == ["1.5", "0.0", "0.0", "0.0"]


def test_snapshot_dispatch(tmp_path, small_grid, rng):
    s = random_state(small_grid, rng)
    assert write_snapshot(s, small_grid, tmp_path / "a.chk", "checkpoint") == [tmp_path / "a.chk"]
    assert len(write_snapshot(s, small_grid, tmp_path / "a.csv", "csv")) == small_grid.n_p
    with pytest.raises(ValueError, match="unknown snapshot format"):
        write_snapshot(s, small_grid, tmp_path / "a.h5", "hdf5")


def test_unwritable_path(tmp_path, small_grid, rng):
    with pytest.raises(OSError):
        write_checkpoint(tmp_path / "missing" / "a.chk", random_state(small_grid, rng), small_grid)
