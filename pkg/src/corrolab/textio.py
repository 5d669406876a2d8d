"""Plain-text tables for profiles, meshes and reports."""
from __future__ import annotations

import numpy as np

from .geometry import BoundaryProfile

PROFILE_KEYS = ("r0", "L", "M", "W", "H")


def write_profile(path, profile, M, H):
    """Two-column table ``x phi(x)`` with a header naming r0, L, M, W, H."""
    header = " ".join(f"{k}={float(v)!r}" for k, v in zip(PROFILE_KEYS, (profile.r0, profile.L, M, profile.width, H)))
    np.savetxt(path, np.column_stack([profile.knots, profile.values]), header=header, fmt="%.17g")


def read_profile_header(path):
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise ValueError(f"{path}: missing header line with {', '.join(PROFILE_KEYS)}")
    meta = dict(item.split("=", 1) for item in first[1:].split())
    missing = [k for k in PROFILE_KEYS if k not in meta]
    if missing:
        raise ValueError(f"{path}: header lacks {', '.join(missing)}")
    return {k: float(meta[k]) for k in PROFILE_KEYS}


def read_profile(path):
    """Inverse of :func:`write_profile`; returns ``(profile, header dict)``."""
    meta = read_profile_header(path)
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, got {data.shape[1]}")
    return BoundaryProfile(data[:, 0], data[:, 1], meta["r0"], meta["L"]), meta


def write_mesh(path, mesh):
    """Vertex, triangle and tagged-edge tables in one file, separated by section headers."""
    with open(path, "w") as fh:
        fh.write(f"# vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"# triangles {mesh.n_triangles}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        fh.write(f"# edges {len(mesh.boundary_edges)}\n")
        for (a, b), tag in zip(mesh.boundary_edges, mesh.edge_tags):
            fh.write(f"{a} {b} {tag}\n")


def read_mesh_tables(path):
    """``(vertices, triangles, edges, tags)`` arrays from :func:`write_mesh` output."""
    blocks, current = {}, None
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                current = line.split()[1]
                blocks[current] = []
            elif line.strip():
                blocks[current].append(line.split())
    vertices = np.array(blocks["vertices"], dtype=float)
    triangles = np.array(blocks["triangles"], dtype=int)
    edges = np.array([row[:2] for row in blocks["edges"]], dtype=int)
    tags = np.array([row[2] for row in blocks["edges"]])
    return vertices, triangles, edges, tags


def write_reports(path, reports):
    """One comma-separated row per :class:`InequalityReport`."""
    from .analysis import InequalityReport

    with open(path, "w") as fh:
        fh.write(",".join(InequalityReport.COLUMNS) + "\n")
        for r in reports:
            fh.write(r.csv_row() + "\n")
