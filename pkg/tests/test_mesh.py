import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oseenvb import mesh as msh


def test_two_triangle_counts(two_tri_mesh):
    m = two_tri_mesh
    assert m.num_vertices == 4
    assert m.num_triangles == 2
    assert m.num_edges == 5
    assert len(m.interior_edges()) == 1
    assert len(m.boundary_edges()) == 4


def test_rect_counts():
    m = msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), 4)
    assert m.num_triangles == 32
    assert len(m.boundary_edges()) == 16
    assert len(m.interior_edges()) == 40
    assert (m.boundary_tag[m.boundary_edges()] == msh.GAMMA1).all()


def test_rect_cell_diagonal_diameter():
    m = msh.generate_rect(((-1.0, -1.0), (1.0, 1.0)), 1)
    assert np.allclose(m.h_T, math.sqrt(2) * 2.0)


def test_rect_errors():
    with pytest.raises(msh.MeshError):
        msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), 0)
    with pytest.raises(msh.MeshError):
        msh.generate_rect(((0.0, 0.0), (0.0, 1.0)), 2)


def test_lshape_counts():
    assert msh.generate_lshape(1).num_triangles == 6
    assert msh.generate_lshape(2).num_triangles == 24
    for n in (1, 2, 3):
        m = msh.generate_lshape(n)
        assert any(np.all(m.vertices == (0.0, 0.0), axis=1)), "reentrant corner vertex"


def test_clockwise_triangle_rejected():
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    with pytest.raises(msh.MeshError, match="counter-clockwise"):
        msh.TriMesh(verts, [(0, 2, 1)], [(0, 1, 1), (1, 2, 1), (2, 0, 1)])


def test_orientation_and_area_invariants(unit_square_16):
    m = unit_square_16
    assert (m.area > 0).all()
    assert abs(m.area.sum() - 1.0) <= 1e-12
    # h_e <= h_T for every edge of every triangle
    for t in range(m.num_triangles):
        for e in m.tri_to_edges[t]:
            assert m.h_e[e] <= m.h_T[t] + 1e-15


def test_edge_frames_relation(unit_square_16):
    n, t = unit_square_16.edge_frames()
    assert np.array_equal(t, np.column_stack([-n[:, 1], n[:, 0]]))
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0)


def test_boundary_normal_points_outward(unit_square_16):
    m = unit_square_16
    n, _ = m.edge_frames()
    for e in m.boundary_edges():
        tri = m.edge_to_tris[e, 0]
        centroid = m.vertices[m.triangles[tri]].mean(axis=0)
        midpoint = 0.5 * (m.vertices[m.edges[e, 0]] + m.vertices[m.edges[e, 1]])
        assert np.dot(n[e], midpoint - centroid) > 0


def test_interior_edge_opposite_orientation(unit_square_16):
    """The two incident triangles traverse a shared edge in opposite senses."""
    m = unit_square_16
    for e in m.interior_edges():
        a, b = m.edges[e]
        senses = []
        for t in m.edge_to_tris[e]:
            tri = list(m.triangles[t])
            i = tri.index(a)
            senses.append(tri[(i + 1) % 3] == b)
        assert senses[0] != senses[1]


def test_refine_uniform_counts_and_h(two_tri_mesh):
    r = msh.refine_uniform(two_tri_mesh)
    assert r.num_triangles == 8
    assert np.isclose(r.h_max, two_tri_mesh.h_max / 2, rtol=1e-15)
    rr = msh.refine_uniform(r)
    assert rr.num_triangles == 32
    assert abs(rr.area.sum() - two_tri_mesh.area.sum()) <= 1e-14


def test_refine_uniform_midpoints(two_tri_mesh):
    m = two_tri_mesh
    r = msh.refine_uniform(m)
    mid = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    assert np.array_equal(r.vertices[m.num_vertices:], mid)


def test_refine_uniform_preserves_tags():
    m = msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), 2,
                          tagger=lambda mid: 2 if mid[0] < 1e-9 else 1)
    r = msh.refine_uniform(m)
    for e in r.boundary_edges():
        midx = 0.5 * (r.vertices[r.edges[e, 0]] + r.vertices[r.edges[e, 1]])[0]
        expect = 2 if midx < 1e-9 else 1
        assert r.boundary_tag[e] == expect


def test_mshtxt_roundtrip(tmp_path, unit_square_16):
    path = tmp_path / "mesh.msh"
    msh.save_mesh(unit_square_16, path)
    m2 = msh.load_mesh(path)
    assert np.array_equal(m2.vertices, unit_square_16.vertices)
    assert np.array_equal(m2.triangles, unit_square_16.triangles)
    assert np.array_equal(m2.boundary_tag, unit_square_16.boundary_tag)
    # writer is bit-exact round-trippable: a second write is identical
    path2 = tmp_path / "mesh2.msh"
    msh.save_mesh(m2, path2)
    assert path.read_text() == path2.read_text()


def test_load_mesh_parse_errors(tmp_path):
    bad = tmp_path / "bad.msh"
    bad.write_text("meshtxt 2\n")
    with pytest.raises(msh.MeshParseError) as err:
        msh.load_mesh(bad)
    assert err.value.lineno == 1

    bad.write_text(
        "meshtxt 1\n3 1 3\n0 0\n1 0\nx 1\n0 1 2\n0 1 1\n1 2 1\n2 0 1\n"
    )
    with pytest.raises(msh.MeshParseError) as err:
        msh.load_mesh(bad)
    assert err.value.lineno == 5

    bad.write_text("meshtxt 1\n3 1 3\n0 0\n1 0\n")
    with pytest.raises(msh.MeshParseError, match="truncated"):
        msh.load_mesh(bad)


def test_load_mesh_clockwise_error(tmp_path):
    bad = tmp_path / "cw.msh"
    bad.write_text(
        "meshtxt 1\n3 1 3\n0.0 0.0\n1.0 0.0\n0.0 1.0\n0 2 1\n0 1 1\n1 2 1\n2 0 1\n"
    )
    with pytest.raises(msh.MeshError, match="triangle 0"):
        msh.load_mesh(bad)


def test_hanging_vertex_detected():
    # triangle (0,1,2) with edge 0-1 split by triangles on the other side
    verts = [(0, 0), (2, 0), (1, 1.5), (1, 0), (1, -1.5)]
    tris = [(0, 1, 2), (0, 4, 3), (3, 4, 1)]
    tags = [(0, 2, 1), (2, 1, 1), (0, 4, 1), (4, 1, 1),
            (0, 1, 1), (0, 3, 1), (3, 1, 1)]
    with pytest.raises(msh.MeshError, match="hanging"):
        msh.TriMesh(np.array(verts, dtype=float), tris, tags)


def test_untagged_boundary_edge_rejected():
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    with pytest.raises(msh.MeshError, match="no tag"):
        msh.TriMesh(verts, [(0, 1, 2)], [(0, 1, 1), (1, 2, 1)])


def test_size_map_identity(unit_square_16):
    m = unit_square_16
    out = msh.refine_by_size_map(m, m.h_T.copy())
    assert out is m


def test_size_map_single_triangle_two_generations():
    """One right triangle, target h/2: exactly two bisection generations."""
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    m = msh.TriMesh(verts, [(0, 1, 2)], [(0, 1, 1), (1, 2, 1), (2, 0, 1)])
    out = msh.refine_by_size_map(m, np.array([m.h_T[0] / 2]))
    assert out.num_triangles == 4
    assert (out.h_T <= m.h_T[0] / 2 + 1e-14).all()
    assert abs(out.area.sum() - 0.5) <= 1e-14


def test_size_map_closure_conformity(two_tri_mesh):
    m = two_tri_mesh
    target = m.h_T.copy()
    target[0] = m.h_T[0] / 2
    out = msh.refine_by_size_map(m, target)
    # constructor would reject hanging nodes; also check edge incidences
    counts = np.bincount(out.tri_to_edges.ravel(), minlength=out.num_edges)
    assert set(counts.tolist()) <= {1, 2}
    assert abs(out.area.sum() - m.area.sum()) <= 1e-12
    # descendants of the marked triangle meet the target
    assert out.h_T.min() <= m.h_T[0] / 2


def test_size_map_floor_clamp_warns(two_tri_mesh):
    with pytest.warns(UserWarning, match="clamped"):
        out = msh.refine_by_size_map(
            two_tri_mesh, np.full(2, 1e-9), size_floor=two_tri_mesh.h_T[0] / 2
        )
    assert (out.h_T <= two_tri_mesh.h_T[0] / 2 + 1e-12).all()


def test_size_map_shape_regularity():
    m = msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), 4)
    target = m.h_T.copy()
    centroids = m.vertices[m.triangles].mean(axis=1)
    sel = np.hypot(centroids[:, 0] - 0.5, centroids[:, 1] - 0.5) < 0.25
    target[sel] = m.h_T[sel] / 4
    out = msh.refine_by_size_map(m, target)
    assert out.shape_regularity() <= 10.0
    assert abs(out.area.sum() - 1.0) <= 1e-12
    assert (out.area > 0).all()


def test_size_map_positive_targets_required(two_tri_mesh):
    with pytest.raises(msh.MeshError):
        msh.refine_by_size_map(two_tri_mesh, np.array([1.0, -1.0]))


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=4),
    w=st.floats(min_value=0.2, max_value=5.0),
    h=st.floats(min_value=0.2, max_value=5.0),
)
def test_rect_area_property(n, w, h):
    m = msh.generate_rect(((0.0, 0.0), (w, h)), n)
    assert m.num_triangles == 2 * n * n
    assert abs(m.area.sum() - w * h) <= 1e-12 * w * h
