"""Boundary-fitted triangulations of graph domains.

The default mesher shears a uniform rectangle grid vertically onto the
domain, so two domains meshed with the same grid shape share connectivity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import QualityFailure

TAG_A = "A"
TAG_I = "I"
TAG_SIGMA = "Sigma"
TAGS = (TAG_A, TAG_I, TAG_SIGMA)

MIN_ANGLE_DEG = 20.0


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    h: float
    domain: object
    grid_shape: Optional[tuple] = None
    parent: Optional["Mesh"] = None

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "edge_tags"):
            getattr(self, name).setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def edges_on(self, part):
        """Boundary edges of ``part``; ``"A"`` includes the Sigma edges."""
        if part == TAG_A:
            mask = (self.edge_tags == TAG_A) | (self.edge_tags == TAG_SIGMA)
        else:
            mask = self.edge_tags == part
        return self.boundary_edges[mask]

    def vertices_on(self, part):
        return np.unique(self.edges_on(part))

    def triangle_areas(self):
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edge_lengths(self, part):
        e = self.edges_on(part)
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    def min_angle(self):
        return float(np.degrees(_triangle_angles(self.vertices[self.triangles]).min()))

    def unique_edges(self):
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)


def _triangle_angles(p):
    angles = []
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
    return np.column_stack(angles)


def grid_shape_for(domain, h):
    x = np.linspace(0.0, domain.W, 2001)
    height = domain.H - float(np.min(domain.profile(x)))
    nx = int(np.ceil(domain.W / h - 1e-9))
    ny = int(np.ceil(height / h - 1e-9))
    return nx, ny


def generate_mesh(domain, h, grid_shape=None, enforce_resolution=True, template=None):
    """Sheared structured triangulation with tagged boundary edges.

    ``grid_shape = (nx, ny)`` overrides the shape derived from ``h``.
    ``template`` is a mesh from :func:`generate_mesh` whose grid shape and
    triangles are reused, so nearby domains get identical connectivity and
    vertex positions that depend smoothly on the profile.
    """
    if enforce_resolution and h > domain.r0 / 4 + 1e-12:
        raise ValueError(f"mesh size h = {h} exceeds r0/4 = {domain.r0 / 4}")
    if template is not None:
        if template.grid_shape is None:
            raise ValueError("template mesh must come from generate_mesh")
        grid_shape = template.grid_shape
    nx, ny = grid_shape if grid_shape is not None else grid_shape_for(domain, h)
    x0 = domain.origin[0]
    xs = x0 + domain.W * np.arange(nx + 1) / nx
    s = np.arange(ny + 1) / ny
    bottom = domain.phi(xs)
    X = np.broadcast_to(xs, (ny + 1, nx + 1))
    Y = bottom[None, :] + s[:, None] * (domain.top - bottom[None, :])
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    I, J = np.meshgrid(np.arange(nx), np.arange(ny))
    I, J = I.ravel(), J.ravel()
    v00, v10, v01, v11 = vid(I, J), vid(I + 1, J), vid(I, J + 1), vid(I + 1, J + 1)
    if template is not None:
        triangles = np.array(template.triangles)
    else:
        triangles = _choose_diagonals(vertices, v00, v10, v01, v11)

    i = np.arange(nx)
    j = np.arange(ny)
    edges = [
        np.column_stack([vid(i, 0), vid(i + 1, 0)]),
        np.column_stack([vid(nx, j), vid(nx, j + 1)]),
        np.column_stack([vid(i + 1, ny), vid(i, ny)]),
        np.column_stack([vid(0, j + 1), vid(0, j)]),
    ]
    boundary_edges = np.vstack(edges)
    tags = np.array([TAG_I] * nx + [TAG_A] * ny + [TAG_A] * nx + [TAG_A] * ny, dtype=object)
    a, b = domain.sigma_abs
    tol = 1e-9 * domain.W
    top = slice(nx + ny, 2 * nx + ny)
    ex = vertices[boundary_edges[top], 0]
    in_sigma = (ex.min(axis=1) >= a - tol) & (ex.max(axis=1) <= b + tol)
    tags[top] = np.where(in_sigma, TAG_SIGMA, TAG_A)

    hx = domain.W / nx
    hy = (domain.H - float(np.min(bottom - domain.origin[1]))) / ny
    mesh = Mesh(vertices, triangles, boundary_edges, tags.astype(str), max(hx, hy), domain, (nx, ny))
    if mesh.min_angle() < MIN_ANGLE_DEG:
        raise QualityFailure(
            f"minimum angle {mesh.min_angle():.2f} deg below {MIN_ANGLE_DEG} deg; profile too steep for the sheared grid"
        )
    return mesh


def _choose_diagonals(vertices, v00, v10, v01, v11):
    """Split each grid cell along the diagonal giving the larger minimum angle."""
    diag_a = np.stack([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])], axis=1)
    diag_b = np.stack([np.column_stack([v00, v10, v01]), np.column_stack([v10, v11, v01])], axis=1)
    quality_a = _triangle_angles(vertices[diag_a.reshape(-1, 3)]).min(axis=1).reshape(-1, 2).min(axis=1)
    quality_b = _triangle_angles(vertices[diag_b.reshape(-1, 3)]).min(axis=1).reshape(-1, 2).min(axis=1)
    # ties keep diagonal a so flat domains mesh identically everywhere
    use_b = quality_b > quality_a + 1e-12
    return np.where(use_b[:, None, None], diag_b, diag_a).reshape(-1, 3)


def refine(mesh):
    """Uniform red refinement; midpoints of I edges are moved onto the graph."""
    edges = mesh.unique_edges()
    nv = mesh.n_vertices
    key = edges[:, 0] * nv + edges[:, 1]
    order = np.argsort(key)
    key_sorted = key[order]

    def midpoint_id(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        pos = np.searchsorted(key_sorted, lo * nv + hi)
        return nv + order[pos]

    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])

    i_edges = mesh.edges_on(TAG_I)
    i_mid = midpoint_id(i_edges[:, 0], i_edges[:, 1])
    vertices[i_mid, 1] = mesh.domain.phi(vertices[i_mid, 0])

    t = mesh.triangles
    m01 = midpoint_id(t[:, 0], t[:, 1])
    m12 = midpoint_id(t[:, 1], t[:, 2])
    m20 = midpoint_id(t[:, 2], t[:, 0])
    triangles = np.vstack([
        np.column_stack([t[:, 0], m01, m20]),
        np.column_stack([m01, t[:, 1], m12]),
        np.column_stack([m20, m12, t[:, 2]]),
        np.column_stack([m01, m12, m20]),
    ])

    be = mesh.boundary_edges
    bm = midpoint_id(be[:, 0], be[:, 1])
    boundary_edges = np.vstack([np.column_stack([be[:, 0], bm]), np.column_stack([bm, be[:, 1]])])
    tags = np.concatenate([mesh.edge_tags, mesh.edge_tags])
    return Mesh(vertices, triangles, boundary_edges, tags, mesh.h / 2, mesh.domain, None, mesh)
