"""Reference-triangle quadrature and Lagrange basis tabulation.

Reference triangle: vertices (0,0), (1,0), (0,1). Quadratic nodes are the
three vertices followed by the midpoints of edges (v0,v1), (v1,v2), (v2,v0).
"""
from __future__ import annotations

import numpy as np

# Degree-4 rule, 6 points (two symmetric orbits), weights sum to 1/2.
# Exact for all quadratic-times-quadratic integrands, which is what the
# mixed pair needs; smooth data picks up the usual O(h^5) per-element error.
_A1 = 0.445948490915965
_B1 = 0.108103018168070
_W1 = 0.223381589678011 / 2.0
_A2 = 0.091576213509771
_B2 = 0.816847572980459
_W2 = 0.109951743655322 / 2.0

QUAD_POINTS = np.array([
    [_A1, _A1], [_B1, _A1], [_A1, _B1],
    [_A2, _A2], [_B2, _A2], [_A2, _B2],
])
QUAD_WEIGHTS = np.array([_W1, _W1, _W1, _W2, _W2, _W2])


def p1_basis(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values (npts, 3) and reference gradients (npts, 3, 2) of the linear basis."""
    xi = points[:, 0]
    eta = points[:, 1]
    vals = np.stack([1.0 - xi - eta, xi, eta], axis=1)
    grads = np.broadcast_to(
        np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (points.shape[0], 3, 2)
    ).copy()
    return vals, grads


def p2_basis(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values (npts, 6) and reference gradients (npts, 6, 2) of the quadratic basis."""
    xi = points[:, 0]
    eta = points[:, 1]
    lam = 1.0 - xi - eta
    vals = np.stack([
        lam * (2.0 * lam - 1.0),
        xi * (2.0 * xi - 1.0),
        eta * (2.0 * eta - 1.0),
        4.0 * lam * xi,
        4.0 * xi * eta,
        4.0 * eta * lam,
    ], axis=1)
    dlam = np.array([-1.0, -1.0])
    grads = np.empty((points.shape[0], 6, 2))
    grads[:, 0] = (4.0 * lam - 1.0)[:, None] * dlam
    grads[:, 1, 0] = 4.0 * xi - 1.0
    grads[:, 1, 1] = 0.0
    grads[:, 2, 0] = 0.0
    grads[:, 2, 1] = 4.0 * eta - 1.0
    grads[:, 3, 0] = 4.0 * (lam - xi)
    grads[:, 3, 1] = -4.0 * xi
    grads[:, 4, 0] = 4.0 * eta
    grads[:, 4, 1] = 4.0 * xi
    grads[:, 5, 0] = -4.0 * eta
    grads[:, 5, 1] = 4.0 * (lam - eta)
    return vals, grads


def geometry(vertices: np.ndarray, triangles: np.ndarray):
    """Affine maps per triangle: Jacobians, inverse-transpose, absolute areas.

    Returns (jac (nt,2,2), inv_jac_t (nt,2,2), area (nt,)).
    """
    p = vertices[triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1]
    inv[:, 0, 1] = -jac[:, 0, 1]
    inv[:, 1, 0] = -jac[:, 1, 0]
    inv[:, 1, 1] = jac[:, 0, 0]
    inv /= det[:, None, None]
    inv_jac_t = np.swapaxes(inv, 1, 2)
    return jac, inv_jac_t, 0.5 * np.abs(det)


def physical_quad_points(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Quadrature points mapped to each triangle, shape (nt, nq, 2)."""
    p1v, _ = p1_basis(QUAD_POINTS)
    return np.einsum("qk,tkd->tqd", p1v, vertices[triangles])
