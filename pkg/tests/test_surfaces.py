import numpy as np
import pytest

from helfrich_disc import mesh, surfaces
from helfrich_disc.errors import OutOfDomain


@pytest.mark.parametrize("name", surfaces.names())
def test_closed_form_derivatives(name):
    surf = surfaces.get(name)
    rng = np.random.default_rng(0)
    lo, hi = surf.domain.min(axis=0), surf.domain.max(axis=0)
    pts = lo + (hi - lo) * rng.uniform(0.2, 0.8, size=(40, 2))
    g, h = surfaces.derivative_errors(surf, pts)
    assert g <= 1e-7 and h <= 1e-6


@pytest.mark.parametrize("name", surfaces.names())
def test_meshes_cover_domain(name):
    surf = surfaces.get(name)
    t = surf.mesh(8)
    assert np.isclose(np.abs(t.areas).sum(), mesh.polygon_area(surf.domain), rtol=1e-12)
    assert np.all(np.isfinite(surfaces.nodal_sample(surf, t)))


def test_sphere_cap_lies_on_unit_sphere():
    cap = surfaces.get("sphere_cap")
    x = np.random.default_rng(1).uniform(-0.35, 0.35, size=(30, 2))
    assert np.allclose(np.sum(x * x, axis=1) + cap.u(x) ** 2, 1.0, rtol=1e-14)


def test_disk_levels_halve_size():
    cap = surfaces.get("sphere_cap")
    sizes = [cap.mesh(n).size for n in (8, 16, 32)]
    assert np.allclose(np.array(sizes[1:]) / sizes[:-1], 0.5)


def test_out_of_domain():
    cap = surfaces.get("sphere_cap")
    t = mesh.structured_mesh((-0.5, 0.5, -0.5, 0.5), 2)
    with pytest.raises(OutOfDomain):
        surfaces.nodal_sample(cap, t)


def test_unknown_surface():
    with pytest.raises(KeyError):
        surfaces.get("torus")
