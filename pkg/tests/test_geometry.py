import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from finer import _accel
from finer import geometry as G
from finer.errors import ContractError


def sphere_grid(res, radius=1.0, lo=-1.0, hi=1.0):
    return G.ScalarGrid.from_function(lambda p: np.linalg.norm(p, axis=1) - radius, res,
                                      (lo,) * 3, (hi,) * 3)


def edge_use_counts(mesh):
    t = mesh.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    return np.unique(e, axis=0, return_counts=True)[1]


def test_grid_layout():
    g = G.ScalarGrid(np.zeros((4, 3, 2)), (0, 0, 0), (1, 2, 3))
    assert g.dims == (2, 3, 4) and g.values.size == 24
    assert g.spacing == (1.0, 1.0, 1.0)
    p = g.points()
    assert p[0].tolist() == [0, 0, 0] and p[1].tolist() == [1, 0, 0] and p[-1].tolist() == [1, 2, 3]
    with pytest.raises(ContractError):
        G.ScalarGrid(np.zeros((1, 3, 3)))


def test_empty_mesh(each_backend):
    m = G.marching_cubes(G.ScalarGrid(np.ones((5, 5, 5))), 0.0)
    assert m.num_vertices == 0 and m.num_triangles == 0


def test_sphere_64(each_backend):
    grid = sphere_grid(64)
    mesh = G.marching_cubes(grid, 0.0)
    r = np.linalg.norm(mesh.vertices, axis=1)
    assert np.all(np.abs(r - 1.0) < math.sqrt(3) * (2 / 63))
    assert np.all(mesh.vertices >= -1) and np.all(mesh.vertices <= 1)
    assert mesh.triangles.min() >= 0 and mesh.triangles.max() < mesh.num_vertices
    assert np.all(mesh.areas() > 0)
    again = G.marching_cubes(grid, 0.0)
    assert again.num_vertices == mesh.num_vertices
    assert np.array_equal(again.vertices, mesh.vertices)


def test_closed_surface_is_watertight(each_backend):
    mesh = G.marching_cubes(sphere_grid(33, radius=0.7), 0.0)
    assert np.all(edge_use_counts(mesh) == 2)
    # Euler characteristic of a sphere
    n_edges = len(edge_use_counts(mesh))
    assert mesh.num_vertices - n_edges + mesh.num_triangles == 2


def test_backends_give_identical_meshes():
    rng = np.random.default_rng(0)
    grids = [sphere_grid(40, 0.8), G.ScalarGrid(rng.normal(size=(9, 10, 11)))]
    for grid in grids:
        with _accel.backend("numpy"):
            a = G.marching_cubes(grid, 0.1)
        with _accel.backend("numba"):
            b = G.marching_cubes(grid, 0.1)
        assert np.array_equal(a.vertices, b.vertices) and np.array_equal(a.triangles, b.triangles)


def test_shift_invariance(each_backend):
    grid = sphere_grid(24, 0.75)
    shifted = G.ScalarGrid(grid.values + 3.0, grid.bbox_min, grid.bbox_max)
    a, b = G.marching_cubes(grid, 0.0), G.marching_cubes(shifted, 3.0)
    assert np.array_equal(a.triangles, b.triangles)
    np.testing.assert_allclose(a.vertices, b.vertices, atol=1e-12)


def test_equal_values_on_iso_do_not_emit_degenerates(each_backend):
    v = np.ones((4, 4, 4))
    v[1:3, 1:3, 1:3] = 0.0   # corners exactly on the level set
    m = G.marching_cubes(G.ScalarGrid(v), 0.0)
    assert m.num_triangles == 0 or np.all(m.areas() > 0)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (5, 4, 6), elements=st.floats(-1, 1)))
def test_random_grids_valid_meshes(values):
    m = G.marching_cubes(G.ScalarGrid(values), 0.0)
    if m.num_triangles:
        assert np.all(m.areas() > 0)
        assert m.triangles.max() < m.num_vertices
        assert len(np.unique(m.triangles)) == m.num_vertices  # no unused vertices
    assert np.all(m.vertices >= -1) and np.all(m.vertices <= 1)


def test_iou_cases():
    g = sphere_grid(16, 0.5)
    assert G.iou(g, g) == 1.0
    a = G.ScalarGrid(np.where(np.arange(8)[None, None, :] < 4, -1.0, 1.0) * np.ones((8, 8, 8)))
    b = G.ScalarGrid(-a.values)
    assert G.iou(a, b) == 0.0
    empty = G.ScalarGrid(np.ones((4, 4, 4)))
    assert G.iou(empty, empty) == 1.0
    with pytest.raises(ContractError):
        G.iou(g, sphere_grid(17, 0.5))
    with pytest.raises(ContractError):
        G.iou(g, sphere_grid(16, 0.5, lo=-2.0))


def test_iou_volume_ratio():
    big, small = sphere_grid(128, 1.0, -1.1, 1.1), sphere_grid(128, 0.8, -1.1, 1.1)
    assert G.iou(big, small) == pytest.approx(0.8**3, rel=0.02)
    assert G.iou(big, small) == G.iou(small, big)


def test_chamfer_trivial_cases(each_backend, rng):
    p = rng.random((50, 3))
    assert G.chamfer(p, p) == 0.0
    assert G.chamfer([[0, 0, 0]], [[1, 0, 0]]) == 1.0
    with pytest.raises(ContractError):
        G.chamfer(np.zeros((0, 3)), p)
    with pytest.raises(ContractError):
        G.chamfer(np.zeros((4, 2)), p)


def test_bucket_equals_brute_force(each_backend):
    r = np.random.default_rng(42)
    a, b = r.random((5000, 3)), r.random((5000, 3))
    brute = G.nearest_sq_dist(a, b, "brute")
    assert np.array_equal(G.nearest_sq_dist(a, b, "bucket"), brute)
    assert G.chamfer(a, b, "bucket") == G.chamfer(a, b, "brute")


def test_bucket_on_surface_points():
    mesh = G.marching_cubes(sphere_grid(48, 0.9), 0.0)
    r = np.random.default_rng(1)
    a, b = G.sample_surface(mesh, 20000, r), G.sample_surface(mesh, 12000, r) * 1.01
    assert np.array_equal(G.nearest_sq_dist(a, b, "bucket"), G.nearest_sq_dist(a, b, "brute"))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_bucket_property(n, m, seed, scale):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(n, 3)) * scale, r.normal(size=(m, 3)) * scale
    assert np.array_equal(G.nearest_sq_dist(a, b, "bucket"), G.nearest_sq_dist(a, b, "brute"))


def test_surface_sampling_lies_on_mesh():
    mesh = G.marching_cubes(sphere_grid(32, 0.8), 0.0)
    pts = G.sample_surface(mesh, 3000, np.random.default_rng(0))
    assert np.all(np.abs(np.linalg.norm(pts, axis=1) - 0.8) < math.sqrt(3) * 2 / 31)


def test_composite_cases():
    c1, c2 = np.array([0.9, 0.2, 0.1]), np.array([0.1, 0.6, 1.0])
    assert np.array_equal(G.composite_ray(([c1, c2], [0.0, 0.0], [0.5, 0.5])), np.zeros(3))
    opaque = G.composite_ray(([c1], [50.0], [1.0]))
    assert np.all(np.abs(opaque - c1) <= 1e-20 + math.exp(-50) * c1)
    two = G.composite_ray(([c1, c2], [math.log(2)] * 2, [1.0, 1.0]))
    assert np.all(np.abs(two - (0.5 * c1 + 0.25 * c2)) <= 1e-12)
    with pytest.raises(ContractError, match="non-negative"):
        G.composite_ray(([c1], [-1.0], [1.0]))
    with pytest.raises(ContractError):
        G.composite_ray(([c1], [1.0], [0.0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_composite_weights_property(n, seed):
    r = np.random.default_rng(seed)
    s = G.RaySamples(r.random((n, 3)), r.exponential(2.0, n), r.uniform(0.01, 1.0, n))
    w = G.composite_weights(s)
    assert np.all(w >= 0) and w.sum() <= 1 + 1e-12
    c = G.composite_ray(s)
    assert np.all((c >= 0) & (c <= 1))
    k = int(r.integers(0, n + 1))
    padded = G.RaySamples(np.insert(s.colors, k, r.random(3), axis=0), np.insert(s.sigmas, k, 0.0),
                          np.insert(s.deltas, k, 0.3))
    np.testing.assert_allclose(G.composite_ray(padded), c, rtol=1e-14, atol=1e-15)


def test_obj_roundtrip(tmp_path):
    mesh = G.marching_cubes(sphere_grid(12, 0.6), 0.0)
    G.write_obj(mesh, tmp_path / "m.obj")
    back = G.read_obj(tmp_path / "m.obj")
    assert np.array_equal(back.triangles, mesh.triangles)
    np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-8)
    text = (tmp_path / "m.obj").read_text().splitlines()
    assert text[0].startswith("v ") and text[-1].startswith("f ")
    assert min(int(t) for line in text if line.startswith("f") for t in line.split()[1:]) == 1


def test_raw_lattice_roundtrip(tmp_path):
    g = sphere_grid(9, 0.5)
    g.write_raw(tmp_path / "g.raw")
    back = G.ScalarGrid.read_raw(tmp_path / "g.raw")
    assert back.dims == g.dims and back.bbox_min == g.bbox_min
    np.testing.assert_allclose(back.values, g.values, rtol=1e-7)
    assert (tmp_path / "g.raw").stat().st_size == 4 * 9**3
