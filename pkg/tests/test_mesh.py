import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helfrich_disc import mesh
from helfrich_disc.errors import ComplexViolation, CoverageGap, DegenerateTriangle, FoldBack
from helfrich_disc.mesh import TriangularComplex3D


def brute_edges(triangles):
    edges = {}
    for k, tri in enumerate(np.asarray(triangles)):
        for a, b in itertools.combinations(tri, 2):
            edges.setdefault((min(a, b), max(a, b)), []).append(k)
    return edges


def test_two_triangle_square(unit_square_pair):
    t = unit_square_pair
    assert t.n_triangles == 2 and t.n_edges == 5
    assert t.interior.sum() == 1
    assert tuple(t.edges[t.interior][0]) == (0, 2)
    assert np.allclose(t.areas, 0.5)


@pytest.mark.parametrize("n", [1, 2, 4, 7])
@pytest.mark.parametrize("pattern", ["right", "crisscross"])
def test_structured_counts_match_enumeration(n, pattern):
    t = mesh.structured_mesh(n=n, pattern=pattern)
    per_cell = 2 if pattern == "right" else 4
    assert t.n_triangles == per_cell * n * n
    ref = brute_edges(t.triangles)
    assert t.n_edges == len(ref)
    assert sorted(map(tuple, t.edges)) == sorted(ref)
    for e, key in enumerate(map(tuple, t.edges)):
        assert sorted(k for k in t.edge_triangles[e] if k >= 0) == sorted(ref[key])
    assert np.all(t.areas > 0)
    assert np.isclose(t.areas.sum(), 1.0, rtol=1e-13)


def test_tri_edges_are_opposite_local_vertices():
    t = mesh.structured_mesh(n=3, pattern="crisscross")
    for k, tri in enumerate(t.triangles):
        for j in range(3):
            a, b = tri[(j + 1) % 3], tri[(j + 2) % 3]
            assert tuple(t.edges[t.tri_edges[k, j]]) == (min(a, b), max(a, b))


def test_clockwise_input_is_reoriented():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    t = mesh.build_triangulation(v, [[0, 2, 1]])
    assert t.areas[0] > 0


def test_degenerate_triangle_rejected():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    with pytest.raises(DegenerateTriangle):
        mesh.build_triangulation(v, [[0, 1, 2], [0, 1, 3]])


def test_edge_shared_by_three_triangles_rejected():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [0.5, 0.5]])
    with pytest.raises(ComplexViolation):
        mesh.build_triangulation(v, [[0, 1, 2], [0, 3, 1], [0, 1, 4]])


def test_vertex_inside_other_triangle_rejected():
    # vertex 3 lies inside triangle (0, 1, 2) but is not one of its corners
    v = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [0.5, 0.5], [3.0, 3.0]])
    with pytest.raises(ComplexViolation):
        mesh.build_triangulation(v, [[0, 1, 2], [1, 4, 3]])


def test_coverage_gap_rejected():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(CoverageGap):
        mesh.build_triangulation(v, [[0, 1, 2]], mesh.rectangle())


def test_regularity_reference_shapes():
    eq = mesh.build_triangulation([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]], [[0, 1, 2]])
    assert np.isclose(mesh.regularity(eq).c_star, np.sqrt(3) / 4, rtol=1e-14)
    right = mesh.build_triangulation([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    rep = mesh.regularity(right)
    assert np.isclose(rep.c_star, 0.25, rtol=1e-14)
    assert np.isclose(rep.size_h, np.sqrt(2), rtol=1e-14)
    thin = mesh.build_triangulation([[0, 0], [1, 0], [0.5, 1e-3]], [[0, 1, 2]])
    rep = mesh.regularity(thin)
    assert np.isclose(rep.c_star, 5e-4, rtol=1e-9)
    assert not rep.is_regular


def test_structured_size_and_c_star():
    rep = mesh.regularity(mesh.structured_mesh(n=2, pattern="right"))
    assert np.isclose(rep.size_h, np.sqrt(2) / 2)
    assert np.isclose(rep.c_star, 0.25)
    rep = mesh.regularity(mesh.structured_mesh(n=2, pattern="crisscross"))
    assert np.isclose(rep.size_h, 0.5)
    assert np.isclose(rep.c_star, 0.25)


def test_disk_mesh_fills_polygon():
    t = mesh.polygon_disk_mesh()
    assert np.isclose(t.areas.sum(), mesh.polygon_area(mesh.regular_polygon()), rtol=1e-12)
    assert mesh.regularity(t).c_star > 0.15


def perturbed_mesh(seed, n=4):
    """Structured mesh with interior vertices jiggled by up to h/5."""
    t = mesh.structured_mesh(n=n, pattern="right")
    rng = np.random.default_rng(seed)
    v = t.vertices.copy()
    inner = np.all((v > 1e-12) & (v < 1 - 1e-12), axis=1)
    v[inner] += rng.uniform(-0.2, 0.2, size=(inner.sum(), 2)) / n
    return mesh.build_triangulation(v, t.triangles, t.domain)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_refinement_halves_size_and_keeps_shape(seed):
    t = perturbed_mesh(seed)
    r = mesh.refine_uniform(t)
    assert r.n_triangles == 4 * t.n_triangles
    assert np.isclose(r.size, t.size / 2, rtol=1e-12)
    assert np.isclose(mesh.regularity(r).c_star, mesh.regularity(t).c_star, rtol=1e-12)
    assert np.isclose(r.areas.sum(), t.areas.sum(), rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_cr_basis_is_dual_to_midpoints(seed):
    t = perturbed_mesh(seed, n=3)
    g = t.cr_gradients
    mids = t.midpoints[t.tri_edges]  # (T, 3, 2)
    # phi_k(x) = 1/3 + g_k . (x - centroid) must equal delta_kj at midpoint j
    vals = 1.0 / 3.0 + np.einsum("tkd,tjd->tkj", g, mids - t.centroids[:, None, :])
    assert np.allclose(vals, np.eye(3)[None], atol=1e-12)


def test_circumcenter_against_linear_solve():
    a, b, c = np.array([0.0, 0.0, 0.0]), np.array([2.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    assert np.allclose(mesh.circumcenter(a, b, c), [1.0, 0.5, 0.0])
    rng = np.random.default_rng(3)
    P = rng.normal(size=(50, 3, 3))
    cc = mesh.circumcenter(P[:, 0], P[:, 1], P[:, 2])
    for (p0, p1, p2), x in zip(P, cc):
        # equidistance plus coplanarity as a 3x3 linear system
        n = np.cross(p1 - p0, p2 - p0)
        M = np.array([2 * (p1 - p0), 2 * (p2 - p0), n])
        rhs = np.array([p1 @ p1 - p0 @ p0, p2 @ p2 - p0 @ p0, n @ p0])
        assert np.allclose(x, np.linalg.solve(M, rhs), atol=1e-9)


def test_circumcenter_degenerate():
    with pytest.raises(DegenerateTriangle):
        mesh.circumcenter([0.0, 0.0], [1.0, 0.0], [2.0, 0.0])


def test_push_forward_normals():
    t = mesh.structured_mesh(n=3)
    flat = mesh.flat_complex(t)
    assert np.allclose(flat.normals, [0, 0, 1])
    tilted = mesh.push_forward(t, t.vertices[:, 0])
    assert np.allclose(tilted.normals, np.array([-1.0, 0.0, 1.0]) / np.sqrt(2))
    assert np.allclose(tilted.apriori_normals, tilted.normals[0])
    assert np.allclose(tilted.grad_u, [1.0, 0.0])


def test_apriori_normals_bisect():
    t = mesh.structured_mesh(n=4)
    cx = mesh.push_forward(t, t.vertices[:, 0] ** 2)
    n0 = cx.apriori_normals
    assert np.allclose(np.linalg.norm(n0, axis=1), 1.0)
    k0, k1 = cx.edge_triangles.T
    inner = cx.interior
    assert np.allclose(np.sum(n0[inner] * cx.normals[k0[inner]], 1), np.sum(n0[inner] * cx.normals[k1[inner]], 1))
    assert np.allclose(np.abs(np.sum(n0 * cx.tangents, 1)), 0.0, atol=1e-14)
    assert np.allclose(n0[~inner], cx.normals[k0[~inner]])


def test_fold_back_detected():
    base = mesh.build_triangulation([[0, 0], [1, 0], [0, 1], [0.5, -1]], [[0, 1, 2], [1, 0, 3]])
    folded = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.2, 0.8, 0.0]])
    cx = TriangularComplex3D(folded, base.triangles, base.edges, base.tri_edges, base.edge_triangles)
    assert np.allclose(cx.normals[0], -cx.normals[1])
    with pytest.raises(FoldBack):
        cx.apriori_normals


def test_transformed_preserves_metric_data():
    t = mesh.structured_mesh(n=3)
    cx = mesh.push_forward(t, np.sin(t.vertices[:, 0]))
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))
    R = q * np.sign(np.linalg.det(q))
    moved = cx.transformed(R, [1.0, -2.0, 0.5])
    assert np.allclose(moved.areas, cx.areas)
    assert np.allclose(moved.normals, cx.normals @ R.T)
    scaled = cx.transformed(scale=3.0)
    assert np.allclose(scaled.areas, 9 * cx.areas)
