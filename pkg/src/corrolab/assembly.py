"""P1 finite element assembly on triangles and boundary edges."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

# Strang-Fix degree-4 rule on the reference triangle, barycentric points,
# weights normalised to sum to one.
_A, _B = 0.445948490915965, 0.091576213509771
_TRI_BARY = np.array([
    [_A, _A, 1 - 2 * _A], [_A, 1 - 2 * _A, _A], [1 - 2 * _A, _A, _A],
    [_B, _B, 1 - 2 * _B], [_B, 1 - 2 * _B, _B], [1 - 2 * _B, _B, _B],
])
_TRI_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)
_EDGE_S = 0.5 * (_GL_X + 1.0)
_EDGE_W = 0.5 * _GL_W


def triangle_quadrature(mesh):
    """Quadrature points ``(nt, nq, 2)``, weights ``(nt, nq)`` and basis values ``(nq, 3)``."""
    p = mesh.vertices[mesh.triangles]
    pts = np.einsum("qk,tkd->tqd", _TRI_BARY, p)
    weights = np.abs(mesh.triangle_areas())[:, None] * _TRI_W[None, :]
    return pts, weights, _TRI_BARY


def edge_quadrature(mesh, edges):
    """Gauss points ``(ne, 3, 2)``, weights ``(ne, 3)`` and basis values ``(3, 2)``."""
    a = mesh.vertices[edges[:, 0]]
    b = mesh.vertices[edges[:, 1]]
    pts = a[:, None, :] + _EDGE_S[None, :, None] * (b - a)[:, None, :]
    length = np.linalg.norm(b - a, axis=1)
    basis = np.column_stack([1.0 - _EDGE_S, _EDGE_S])
    return pts, length[:, None] * _EDGE_W[None, :], basis


def _gradients(mesh):
    p = mesh.vertices[mesh.triangles]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    grads = np.empty((len(p), 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / area2
        grads[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / area2
    return grads, 0.5 * np.abs(area2)


def gradients(mesh):
    """Constant basis gradients per triangle, shape ``(nt, 3, 2)``, and areas."""
    return _gradients(mesh)


def _scatter(mesh_n, conn, local):
    rows = np.repeat(conn, conn.shape[1], axis=1).ravel()
    cols = np.tile(conn, (1, conn.shape[1])).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(mesh_n, mesh_n))


def stiffness_matrix(mesh, coefficient=None):
    """``int c grad u . grad v``; ``coefficient`` holds values at triangle quadrature points."""
    grads, area = _gradients(mesh)
    if coefficient is None:
        c = area
    else:
        c = np.asarray(coefficient) @ _TRI_W * area
    local = c[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)
    return _scatter(mesh.n_vertices, mesh.triangles, local)


def mass_matrix(mesh):
    area = np.abs(mesh.triangle_areas())
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = area[:, None, None] * base[None]
    return _scatter(mesh.n_vertices, mesh.triangles, local)


def boundary_mass_matrix(mesh, edges, coefficient=None):
    """``int_e c u v`` over the given edges; ``coefficient(points) -> values``."""
    pts, w, basis = edge_quadrature(mesh, edges)
    c = np.ones(w.shape) if coefficient is None else np.asarray(coefficient(pts.reshape(-1, 2))).reshape(w.shape)
    local = np.einsum("eq,qi,qj->eij", c * w, basis, basis)
    return _scatter(mesh.n_vertices, edges, local)


def boundary_load(mesh, edges, func):
    """``int_e f v`` over the given edges; ``func(points) -> values``."""
    pts, w, basis = edge_quadrature(mesh, edges)
    f = np.asarray(func(pts.reshape(-1, 2))).reshape(w.shape)
    local = np.einsum("eq,qi->ei", f * w, basis)
    return np.bincount(edges.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def domain_load(mesh, func):
    """``int_Omega f v`` with the degree-4 triangle rule."""
    pts, w, basis = triangle_quadrature(mesh)
    f = np.asarray(func(pts.reshape(-1, 2))).reshape(w.shape)
    local = np.einsum("tq,qi->ti", f * w, basis)
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def evaluate_at_quadrature(mesh, values):
    """P1 field values at the triangle quadrature points, shape ``(nt, nq)``."""
    return np.asarray(values)[mesh.triangles] @ _TRI_BARY.T


def l2_error(mesh, values, exact):
    """``||u_h - exact||_{L2(Omega)}`` for a nodal P1 field."""
    pts, w, _ = triangle_quadrature(mesh)
    diff = evaluate_at_quadrature(mesh, values) - np.asarray(exact(pts.reshape(-1, 2))).reshape(w.shape)
    return float(np.sqrt(np.sum(w * diff**2)))


def boundary_l2_error(mesh, edges, values, exact):
    pts, w, basis = edge_quadrature(mesh, edges)
    uh = np.asarray(values)[edges] @ basis.T
    diff = uh - np.asarray(exact(pts.reshape(-1, 2))).reshape(w.shape)
    return float(np.sqrt(np.sum(w * diff**2)))


def weighted_mass_matrix(mesh, coefficient):
    """``int c u v`` with ``coefficient`` given at triangle quadrature points."""
    _, w, basis = triangle_quadrature(mesh)
    local = np.einsum("tq,qi,qj->tij", np.asarray(coefficient) * w, basis, basis)
    return _scatter(mesh.n_vertices, mesh.triangles, local)


def subtriangle_points(k):
    """Barycentric centroids of the ``k^2`` congruent sub-triangles of the reference triangle."""
    pts = []
    for i in range(k):
        for j in range(k - i):
            pts.append(((i + 1 / 3) / k, (j + 1 / 3) / k))
            if i + j <= k - 2:
                pts.append(((i + 2 / 3) / k, (j + 2 / 3) / k))
    xi = np.array(pts)
    return np.column_stack([1.0 - xi.sum(axis=1), xi])
