import numpy as np
import pytest

from ranspinn.data import (DataError, FieldSamples, Geometry, boundary_points, load_csv, make_mms_case,
                           mms_boundary, read_field_csv, split_cloud, write_field_csv)
from ranspinn.mms import MmsCase
from ranspinn.physics import RefScales

HEADER = "x,y,u,v,p,k,eps\n"


def _write(tmp_path, body, header=HEADER, name="f.csv"):
    p = tmp_path / name
    p.write_text(header + body)
    return p


def _cloud(n, seed=0):
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    return FieldSamples(x, y, np.sin(x), np.cos(y), x * y, 0.1 + x, 0.2 + y, np.full(n, "interior"))


def test_csv_roundtrip_is_exact(tmp_path):
    s = _cloud(50)
    back = read_field_csv(write_field_csv(tmp_path / "a.csv", s, re=5600.0))
    for c in ("x", "y", "u", "v", "p", "k", "eps"):
        np.testing.assert_array_equal(getattr(back, c), getattr(s, c))
    assert np.all(back.re == 5600.0)


def test_single_row(tmp_path):
    s = read_field_csv(_write(tmp_path, "0.5,0.5,1.0,0.0,0.1,0.01,0.001\n"))
    assert len(s) == 1 and s.tag[0] == "interior"


def test_missing_column(tmp_path):
    with pytest.raises(DataError, match="eps"):
        read_field_csv(_write(tmp_path, "0,0,1,0,0,0.1\n", header="x,y,u,v,p,k\n"))


def test_non_numeric_reports_line(tmp_path):
    body = "0,0,1,0,0,0.1,0.1\n0,0,abc,0,0,0.1,0.1\n"
    with pytest.raises(DataError, match=r":3: column 'u'"):
        read_field_csv(_write(tmp_path, body))


def test_negative_k_reports_line(tmp_path):
    body = "0,0,1,0,0,0.1,0.1\n0,0,1,0,0,0.1,0.1\n0,0,1,0,0,-0.1,0.1\n"
    with pytest.raises(DataError, match=r":4: negative k"):
        read_field_csv(_write(tmp_path, body))


def test_nonpositive_eps_interior(tmp_path):
    with pytest.raises(DataError, match="eps"):
        read_field_csv(_write(tmp_path, "0,0,1,0,0,0.1,0.0\n"))


def test_nan_rejected(tmp_path):
    with pytest.raises(DataError, match="non-finite"):
        read_field_csv(_write(tmp_path, "0,0,nan,0,0,0.1,0.1\n"))


def test_unknown_tag(tmp_path):
    with pytest.raises(DataError, match="unknown tag"):
        read_field_csv(_write(tmp_path, "0,0,1,0,0,0.1,0.1,inflow\n", header="x,y,u,v,p,k,eps,tag\n"))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_field_csv(tmp_path / "none.csv")


def test_split_disjoint_and_deterministic():
    v1, d1, c1 = split_cloud(10_000, 3000, 3000, seed=7)
    v2, d2, c2 = split_cloud(10_000, 3000, 3000, seed=7)
    for a, b in ((v1, v2), (d1, d2), (c1, c2)):
        np.testing.assert_array_equal(a, b)
    assert len(v1) == 2000 and len(d1) == 3000 and len(c1) == 3000
    assert not set(v1) & set(d1) and not set(v1) & set(c1) and not set(d1) & set(c1)
    _, d3, _ = split_cloud(10_000, 3000, 3000, seed=8)
    assert not np.array_equal(d1, d3)


def test_split_small_cloud_takes_what_is_left():
    v, d, c = split_cloud(100, 3000, 3000, seed=0)
    assert len(v) == 20 and len(d) == 80 and len(c) == 0


def test_geometry_validation():
    with pytest.raises(ValueError):
        Geometry(xmin=1.0, xmax=1.0)
    with pytest.raises(ValueError):
        Geometry(obstacle=[[0.2, 0.2], [0.3, 0.3], [0.4, 0.4]])
    with pytest.raises(ValueError):
        Geometry(edges={"left": "nozzle"})


def test_boundary_targets():
    g = Geometry(edges={"left": "inlet", "right": "outlet", "bottom": "wall", "top": "symmetry"}, u_inlet=2.0)
    b = boundary_points(g, 10, seed=0)
    assert len(b) == 40
    inlet = b.tag == "inlet"
    assert np.all(b.x[inlet] == 0.0) and np.all(b.u[inlet] == 2.0) and np.all(b.v[inlet] == 0.0)
    assert np.all(b.p[b.tag == "outlet"] == 0.0) and np.all(np.isnan(b.u[b.tag == "outlet"]))
    assert np.all(b.u[b.tag == "wall"] == 0.0)
    sym = b.tag == "symmetry"
    assert np.all(b.v[sym] == 0.0) and np.all(np.isnan(b.u[sym]))


def test_obstacle_points_are_walls_and_excluded():
    square = [[0.4, 0.4], [0.6, 0.4], [0.6, 0.6], [0.4, 0.6]]
    g = Geometry(obstacle=square)
    b = boundary_points(g, 25, seed=1)
    walls = b.subset(np.flatnonzero(b.tag == "wall"))
    assert len(walls) == 25
    on_edge = (np.isclose(walls.x, 0.4) | np.isclose(walls.x, 0.6) | np.isclose(walls.y, 0.4)
               | np.isclose(walls.y, 0.6))
    assert on_edge.all()
    assert not g.contains(np.array([[0.5, 0.5]]))[0] and g.contains(np.array([[0.1, 0.1]]))[0]


def test_load_csv_normalizes_and_splits(tmp_path):
    s = _cloud(1000)
    path = write_field_csv(tmp_path / "c.csv", s)
    sc = RefScales(length=2.0, velocity=4.0, rho=1.0)
    ds = load_csv(path, sc, re=100.0, n_data=300, n_colloc=300, seed=0)
    assert len(ds.data) == 300 and len(ds.collocation) == 300 and len(ds.validation) == 200
    assert ds.data.x.max() <= 0.5 and ds.provenance == "csv"
    assert ds.re == 100.0


def test_load_csv_needs_reynolds(tmp_path):
    path = write_field_csv(tmp_path / "c.csv", _cloud(10))
    with pytest.raises(DataError, match="Reynolds"):
        load_csv(path)


def test_mms_case_dataset():
    case, ds = make_mms_case("poly-channel", 3000.0, n_data=100, n_colloc=100, n_cloud=500, n_boundary=10)
    assert ds.provenance == "mms" and ds.bounds == case.bounds
    f = case.forcing(ds.collocation[:, 0], ds.collocation[:, 1])
    np.testing.assert_array_equal(ds.forcing["r_mom_x"], f["r_mom_x"])
    exact = case.fields(ds.data.x, ds.data.y)
    np.testing.assert_array_equal(ds.data.u, exact["u"])


def test_mms_boundary_targets_are_analytic():
    case = MmsCase("poly-channel", 4200.0)
    b = mms_boundary(case, 10, seed=0)
    inlet = b.tag == "inlet"
    np.testing.assert_allclose(b.u[inlet], 1.0 - 4.0 * b.y[inlet] ** 2)
    np.testing.assert_allclose(b.u[b.tag == "wall"], 0.0, atol=1e-15)
