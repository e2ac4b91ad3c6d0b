import numpy as np
import pytest
from scipy.integrate import dblquad

from helfrich_disc import directors as dr
from helfrich_disc import energy as en
from helfrich_disc import mesh, surfaces
from helfrich_disc.convergence import level_complex, reference_energy
from helfrich_disc.errors import DegenerateDual, QuadratureUnavailable

W = en.willmore()


def fundamental_form_density(surf, x, y):
    """tr((I^-1 II)^2) sqrt(det I): the Willmore density from the first and
    second fundamental forms of the graph."""
    p = surf.grad_u(np.array([[x, y]]))[0]
    H = surf.hess_u(np.array([[x, y]]))[0]
    I = np.eye(2) + np.outer(p, p)
    w = np.sqrt(1 + p @ p)
    S = np.linalg.solve(I, H / w)
    return np.trace(S @ S) * w


def test_graph_density_hand_values():
    xi = np.zeros((1, 3, 2))
    xi[0, 0, 0] = 1.0
    assert np.isclose(en.graph_integrand_F(W, [[0, 0]], [0], [[0, 0]], xi)[0], 1.0)
    assert np.isclose(en.graph_integrand_F(W, [[0, 0]], [0], [[1, 0]], xi)[0], np.sqrt(2) / 2, rtol=1e-14)
    assert en.graph_integrand_F(W, [[0, 0]], [0], [[0.3, 2.0]], np.zeros((1, 3, 2)))[0] == 0.0


def test_left_inverse_matches_numpy_pinv():
    rng = np.random.default_rng(2)
    p = rng.normal(size=(20, 2)) * 2
    P = en._pinv_J(p)
    for pi, Pi in zip(p, P):
        J = np.array([[1.0, 0.0], [0.0, 1.0], pi])
        assert np.allclose(Pi, np.linalg.pinv(J), atol=1e-13)


@pytest.mark.parametrize("name", ["flat", "plane"])
def test_affine_surfaces_have_zero_energy(name):
    surf = surfaces.get(name)
    assert reference_energy(surf, W).total == 0.0
    cx = level_complex(surf, 8)
    assert en.discrete_energy(cx, dr.recovery_director(cx, surf), W).total <= 1e-14


@pytest.mark.parametrize(
    "name, frozen",
    [
        ("paraboloid", 1.632539840701702),
        ("saddle", 1.6177866436798314),
        ("cubic", 1.8901782958445463),
    ],
)
def test_continuous_energy_against_fundamental_forms(name, frozen):
    surf = surfaces.get(name)
    x0, x1, y0, y1 = surf.bounds
    oracle, _ = dblquad(lambda y, x: fundamental_form_density(surf, x, y), x0, x1, y0, y1, epsabs=1e-12, epsrel=1e-12)
    E0 = reference_energy(surf, W).total
    assert np.isclose(E0, oracle, rtol=1e-10)
    assert np.isclose(E0, frozen, rtol=1e-12)


def test_paraboloid_radial_closed_form(paraboloid):
    # for u = (x^2 + y^2) / 2 the density is (1+r^2)^(-5/2) + (1+r^2)^(-1/2)
    f = lambda y, x: (1 + x * x + y * y) ** -2.5 + (1 + x * x + y * y) ** -0.5  # noqa: E731
    oracle, _ = dblquad(f, -0.5, 0.5, -0.5, 0.5, epsabs=1e-13, epsrel=1e-13)
    assert np.isclose(reference_energy(paraboloid, W).total, oracle, rtol=1e-12)


def test_quadrature_order_converged(paraboloid):
    m = surfaces.get("gaussian_bump").mesh(32, "crisscross")
    a = en.continuous_energy(surfaces.get("gaussian_bump"), W, 6, m).total
    b = en.continuous_energy(surfaces.get("gaussian_bump"), W, 10, m).total
    assert np.isclose(a, b, rtol=1e-9)


def test_single_triangle_energy_is_area_times_frobenius():
    t = mesh.build_triangulation([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    cx = mesh.flat_complex(t)
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(3, 3))
    field = dr.DirectorField(cx, vals)
    M = np.column_stack([np.ones(3), t.midpoints])
    G = np.linalg.solve(M, vals)[1:].T
    E = en.discrete_energy(cx, field, W)
    assert np.isclose(E.total, 0.5 * np.sum(G * G), rtol=1e-13)
    assert E.per_triangle.shape == (1,)


def test_discrete_energy_close_to_continuous(paraboloid):
    cx = level_complex(paraboloid, 32)
    E = en.discrete_energy(cx, dr.recovery_director(cx, paraboloid), W).total
    assert abs(E - reference_energy(paraboloid, W).total) / reference_energy(paraboloid, W).total <= 0.02


def test_report_totals_and_order_independence(paraboloid):
    cx = level_complex(paraboloid, 8)
    f = dr.recovery_director(cx, paraboloid)
    r1 = en.discrete_energy(cx, f, W, quad_order=1)
    r6 = en.discrete_energy(cx, f, W, quad_order=6)
    assert r1.total == r6.total
    assert np.isclose(r1.per_triangle.sum(), r1.total, rtol=1e-14)
    d = r1.as_dict(per_triangle=True)
    assert d["format"] == "helfrich-disc v1" and len(d["per_triangle"]) == cx.n_triangles
    with pytest.raises(QuadratureUnavailable):
        en.discrete_energy(cx, f, W, quad_order=11)


def test_weighted_density_quadrature_converges(paraboloid):
    cx = level_complex(paraboloid, 8)
    f = dr.recovery_director(cx, paraboloid)
    ww = en.integrand_by_name("weighted_willmore")
    e4 = en.discrete_energy(cx, f, ww, 4).total
    e8 = en.discrete_energy(cx, f, ww, 8).total
    plain = en.discrete_energy(cx, f, W).total
    assert np.isclose(e4, e8, rtol=1e-12)  # weight is quadratic, order 4 is exact
    assert e4 > plain


def rotation(seed):
    q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(3, 3)))
    return q * np.sign(np.linalg.det(q))


@pytest.mark.parametrize("seed", range(3))
def test_rigid_motion_invariance(paraboloid, seed):
    cx = level_complex(surfaces.get("gaussian_bump"), 8)
    f = dr.recovery_director(cx, surfaces.get("gaussian_bump"))
    R = rotation(seed)
    moved = cx.transformed(R, [0.3, -1.0, 2.0])
    g = dr.DirectorField(moved, f.values @ R.T)
    for integrand in (W, en.p_willmore(3.0)):
        a = en.discrete_energy(cx, f, integrand).total
        b = en.discrete_energy(moved, g, integrand).total
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


@pytest.mark.parametrize("lam", [0.25, 3.0])
def test_scaling(lam):
    surf = surfaces.get("cubic")
    cx = level_complex(surf, 8)
    f = dr.recovery_director(cx, surf)
    scaled = cx.transformed(scale=lam)
    g = dr.DirectorField(scaled, f.values)
    for p in (2.0, 3.0):
        a = en.discrete_energy(cx, f, en.p_willmore(p)).total
        b = en.discrete_energy(scaled, g, en.p_willmore(p)).total
        assert abs(b - lam ** (2 - p) * a) <= 1e-10 * max(1.0, abs(b))


def test_integrand_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    x, n, A = rng.normal(size=(5, 3)), rng.normal(size=(5, 3)), rng.normal(size=(5, 3, 3))
    for integrand in (W, en.p_willmore(3.0), en.integrand_by_name("weighted_willmore")):
        exact = integrand.grad_A(x, n, A)
        numeric = en.Integrand("fd", integrand.f, integrand.p).gradient(x, n, A)
        assert np.allclose(exact, numeric, rtol=1e-6, atol=1e-7)


def test_assumption_checks():
    for name in ("willmore", "p_willmore", "weighted_willmore"):
        assert en.check_assumptions(en.integrand_by_name(name, p=3.0)) == (True, True)
    sc = en.integrand_by_name("spontaneous_curvature", allow_violating=True)
    assert sc.assumption_violating
    assert not en.check_assumptions(sc)[0]
    with pytest.raises(ValueError):
        en.integrand_by_name("spontaneous_curvature")
    with pytest.raises(KeyError):
        en.integrand_by_name("nope")
    with pytest.raises(ValueError):
        en.p_willmore(1.0)


def test_fd_energy_hinge():
    # two triangles folded about their common diagonal
    base = mesh.build_triangulation([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]])
    z = 0.4
    cx = mesh.push_forward(base, [0.0, z, 0.0, 0.0])
    n1 = np.cross([1, 0, z], [1, 1, 0])
    n2 = np.cross([1, 1, 0], [0, 1, 0])
    n1, n2 = n1 / np.linalg.norm(n1), n2 / np.linalg.norm(n2)
    # the second triangle is flat and right-angled at (0,1): circumcenter at (0.5,0.5,0)
    a, b, c = np.array([0, 0, 0.0]), np.array([1, 0, z]), np.array([1, 1, 0.0])
    M = np.array([2 * (b - a), 2 * (c - a), np.cross(b - a, c - a)])
    cc1 = np.linalg.solve(M, [b @ b - a @ a, c @ c - a @ a, np.cross(b - a, c - a) @ a])
    d = np.linalg.norm(cc1 - [0.5, 0.5, 0.0])
    expected = np.sqrt(2) / d * np.sum((n1 - n2) ** 2)
    assert np.isclose(en.fd_energy(cx).total, expected, rtol=1e-12)


def test_fd_energy_flat_mesh_has_degenerate_dual():
    # adjacent right triangles share a circumcenter on their hypotenuse
    with pytest.raises(DegenerateDual):
        en.fd_energy(mesh.flat_complex(mesh.structured_mesh(n=2)))


def test_fd_energy_tracks_willmore_on_sphere_cap():
    cap = surfaces.get("sphere_cap")
    ratio = en.fd_energy(level_complex(cap, 32)).total / reference_energy(cap, W).total
    assert 0.9 <= ratio <= 1.1
