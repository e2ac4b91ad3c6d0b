"""Symmetric quadrature rules on triangles.

A rule of order ``d`` integrates every polynomial of total degree <= d
exactly.  Rules are collapsed (Duffy) tensor products of Gauss-Jacobi and
Gauss-Legendre points, symmetrized over the six permutations of the
barycentric coordinates; symmetrization keeps the degree of exactness.
"""
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import QuadratureUnavailable

MAX_ORDER = 10


@lru_cache(maxsize=None)
def triangle_rule(order):
    """Barycentric points (Q, 3) and weights (Q,) summing to one."""
    if not 1 <= order <= MAX_ORDER:
        raise QuadratureUnavailable(f"quadrature order {order} not in 1..{MAX_ORDER}")
    if order == 1:
        pts, w = np.full((1, 3), 1.0 / 3.0), np.ones(1)
    else:
        k = (order + 2) // 2
        xj, wj = roots_jacobi(k, 1.0, 0.0)
        xl, wl = roots_legendre(k)
        s, ws = 0.5 * (xj + 1.0), wj / 4.0
        t, wt = 0.5 * (xl + 1.0), wl / 2.0
        S, T = np.meshgrid(s, t, indexing="ij")
        xi, eta = S.ravel(), (T * (1.0 - S)).ravel()
        base = np.stack([1.0 - xi - eta, xi, eta], axis=1)
        bw = 2.0 * np.outer(ws, wt).ravel()
        perms = list(permutations(range(3)))
        pts = np.concatenate([base[:, p] for p in perms])
        w = np.tile(bw, len(perms)) / len(perms)
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def physical_points(corners, order):
    """Quadrature points for a batch of triangles.

    ``corners`` has shape (T, 3, D); returns points (T, Q, D) and the
    barycentric weights (Q,), to be multiplied by each triangle's area.
    """
    bary, w = triangle_rule(order)
    return np.einsum("qk,tkd->tqd", bary, corners), w
