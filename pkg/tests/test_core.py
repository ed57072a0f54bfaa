import numpy as np
import pytest

from warmcloud.core import (FIELDS, INTERIOR, BoundarySpec, ConfigError, FieldBC, GridConfig, MoistState,
                            PhysParams, build_grid, field_minmax, slab_map)
from warmcloud.operators import apply_boundary_ghosts


def test_pressure_centres_uniform():
    g = build_grid(GridConfig(2, 2, 4, p0=1e5, p1=2e4, Tbar=250.0))
    # dp = 2e4; centres sit half a step inside each layer
    assert g.dp == pytest.approx(2e4)
    np.testing.assert_allclose(g.p, [9e4, 7e4, 5e4, 3e4])
    np.testing.assert_allclose(np.diff(g.p), -g.dp)
    np.testing.assert_allclose(g.p_faces, [1e5, 8e4, 6e4, 4e4, 2e4])


def test_weight_constant_tbar_increasing(si):
    g = build_grid(GridConfig(3, 3, 10, Tbar=250.0), si)
    np.testing.assert_allclose(g.w, si.g * g.p / (si.R_d * 250.0), rtol=1e-15)
    # k counts upward, p decreases, so w decreases with k
    assert np.all(np.diff(g.w) < 0)


@pytest.mark.parametrize("tbar", [0.0, np.array([250.0, 0.0, 240.0]), lambda p: p * 0 - 1.0, np.nan])
def test_bad_tbar_rejected(tbar):
    with pytest.raises(ConfigError):
        build_grid(GridConfig(3, 3, 3, Tbar=tbar))


@pytest.mark.parametrize("kw", [dict(nx=1), dict(n_p=0), dict(Lx=0.0), dict(Ly=-1.0),
                                dict(p1=1e5), dict(p1=2e5), dict(p1=0.0)])
def test_bad_geometry_rejected(kw):
    base = dict(nx=3, ny=3, n_p=3)
    base.update(kw)
    with pytest.raises(ConfigError):
        build_grid(GridConfig(**base))


def test_weight_bounds(small_grid):
    lo, hi = small_grid.w_bounds
    assert 0 < lo <= small_grid.w.min()
    assert small_grid.w.max() <= hi
    assert np.all(small_grid.w_faces > 0)
    # faces are geometric means of the neighbouring centres
    np.testing.assert_allclose(small_grid.w_faces[1:-1] ** 2, small_grid.w[:-1] * small_grid.w[1:])


def test_grid_arrays_read_only(small_grid):
    with pytest.raises(ValueError):
        small_grid.p[0] = 3.0


def test_minmax_constant(small_grid):
    f = small_grid.field(2.5)
    assert field_minmax(f, small_grid) == (2.5, 2.5)


def test_minmax_minus_x(small_grid):
    P, Y, X = small_grid.mesh()
    s = MoistState.from_interior(small_grid, T=np.broadcast_to(-X, small_grid.interior_shape))
    lo, hi = field_minmax(s.T, small_grid)
    assert lo == pytest.approx(-small_grid.x[-1])
    assert hi == pytest.approx(-small_grid.x[0])


def test_minmax_brute_force(small_grid, rng):
    f = rng.normal(size=small_grid.shape)
    f[0] = 100.0  # ghost values must be ignored
    lo, hi = np.inf, -np.inf
    for k in range(1, f.shape[0] - 1):
        for j in range(1, f.shape[1] - 1):
            for i in range(1, f.shape[2] - 1):
                lo, hi = min(lo, f[k, j, i]), max(hi, f[k, j, i])
    assert field_minmax(f, small_grid) == (lo, hi)


def test_minmax_nan(small_grid):
    f = small_grid.field(1.0)
    f[2, 2, 2] = np.nan
    with pytest.raises(FloatingPointError):
        field_minmax(f, small_grid)


def test_ghost_fill_leaves_interior(small_grid, rng):
    f = rng.random(small_grid.shape)
    before = f[INTERIOR].tobytes()
    bc = FieldBC(alpha0=lambda x, y, p, t: 1 + x * y, b0=0.3, alphal=2.0, bl=lambda x, y, p, t: p + t)
    apply_boundary_ghosts(f, bc, small_grid, 0.4)
    assert f[INTERIOR].tobytes() == before


def test_state_copy_independent(small_grid):
    s = MoistState.zeros(small_grid, t=1.5)
    c = s.copy()
    c.T[...] = 3.0
    assert s.T.max() == 0.0 and c.t == 1.5
    assert set(s.fields()) == set(FIELDS)


def test_boundary_validation(small_grid):
    BoundarySpec().validate(small_grid, [0.0, 1.0])
    bad = BoundarySpec(qv=FieldBC(b0=lambda x, y, p, t: np.sin(10 * x) * 0.1))
    with pytest.raises(ConfigError):
        bad.validate(small_grid, [0.0])
    assert BoundarySpec(T=FieldBC(b0=2.0, bl=3.0)).sup(small_grid, [0.0], "T") == 3.0


@pytest.mark.parametrize("change", [dict(c_l=1000.0), dict(R_v=200.0), dict(mu_qc=0.0), dict(V=-1.0),
                                    dict(T_low=300.0), dict(beta=0.5), dict(kappa1=0.1)])
def test_params_validation(change):
    with pytest.raises(ConfigError):
        PhysParams(**change)


def test_beta_message():
    with pytest.raises(ConfigError, match="beta"):
        PhysParams(beta=0.5)


def test_params_derived(si):
    assert 0 < si.E < 1
    assert si.E == pytest.approx(287.0 / 461.5)
    assert si.kappa1 == pytest.approx(461.5 / 1005.0)
    # replace refreshes the certified bound
    assert si.replace(R_v=500.0).kappa1 == pytest.approx(500.0 / 1005.0)


@pytest.mark.parametrize("workers", [1, 2, 3, 7])
def test_slab_map_covers_every_index(workers):
    out = np.zeros(10)

    def work(sl):
        out[sl] += np.arange(10)[sl]

    slab_map(work, 10, workers)
    np.testing.assert_array_equal(out, np.arange(10))
