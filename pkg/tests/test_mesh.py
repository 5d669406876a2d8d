import numpy as np
import pytest

from corrolab.errors import QualityFailure
from corrolab.geometry import BoundaryProfile, build_domain
from corrolab.mesh import MIN_ANGLE_DEG, TAG_A, TAG_I, TAG_SIGMA, generate_mesh, refine
from corrolab.textio import read_mesh_tables, write_mesh

R0 = 0.1


def sine_domain(a=0.05):
    # the quadratic term breaks periodicity, which would make the area exact
    p = BoundaryProfile.from_function(lambda x: a * np.sin(2 * np.pi * x) + 0.04 * x**2, 1.0, R0, 1.0)
    return build_domain(p, 1.0, 1.0, (R0, 1.0, 120.0))


def test_flat_square_counts(flat_domain):
    m = generate_mesh(flat_domain, 0.25, enforce_resolution=False)
    assert (m.n_vertices, m.n_triangles) == (25, 32)
    assert m.min_angle() == pytest.approx(45.0)


def test_refine_counts(flat_domain):
    m = generate_mesh(flat_domain, 0.25, enforce_resolution=False)
    f = refine(m)
    assert f.n_triangles == 128
    assert f.n_vertices == m.n_vertices + len(m.unique_edges())
    assert refine(f).h == pytest.approx(m.h / 4)
    assert f.parent is m


def test_resolution_precondition(flat_domain):
    with pytest.raises(ValueError):
        generate_mesh(flat_domain, 0.05)


def test_quality_failure_on_stretched_cells(flat_domain):
    # cells 0.25 wide and 0.025 high: best split has a 5.7 degree angle
    with pytest.raises(QualityFailure):
        generate_mesh(flat_domain, 0.025, grid_shape=(4, 40))


def test_mesh_is_conforming_with_positive_areas():
    m = generate_mesh(sine_domain(), R0 / 4)
    assert np.all(m.triangle_areas() > 0)
    assert m.min_angle() >= MIN_ANGLE_DEG
    # every interior edge is shared by two triangles, every boundary edge by one
    e = np.sort(m.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    assert set(counts) <= {1, 2}
    assert np.sum(counts == 1) == len(m.boundary_edges)


def test_tags_partition_boundary():
    d = sine_domain()
    m = generate_mesh(d, R0 / 4)
    assert set(m.edge_tags) == {TAG_A, TAG_I, TAG_SIGMA}
    sig = m.edges_on(TAG_SIGMA)
    a, b = d.sigma_abs
    assert np.all(np.isclose(m.vertices[sig, 1], d.top))
    assert np.all((m.vertices[sig, 0] >= a - 1e-12) & (m.vertices[sig, 0] <= b + 1e-12))
    assert len(m.edges_on(TAG_A)) + len(m.edges_on(TAG_I)) == len(m.boundary_edges)
    bottom = m.vertices[m.vertices_on(TAG_I)]
    assert np.allclose(bottom[:, 1], d.phi(bottom[:, 0]), atol=1e-14)


def _geometry_errors(d, levels=4):
    m = generate_mesh(d, R0 / 4)
    area_err, len_err = [], []
    exact_len = d.profile.arc_length(200000)
    for _ in range(levels):
        area_err.append(abs(m.triangle_areas().sum() - d.area))
        len_err.append(abs(m.edge_lengths(TAG_I).sum() - exact_len))
        m = refine(m)
    return np.array(area_err), np.array(len_err)


def test_area_and_length_converge_at_second_order():
    area_err, len_err = _geometry_errors(sine_domain())
    assert np.all(np.log2(area_err[:-1] / area_err[1:]) >= 1.9)
    assert np.all(np.log2(len_err[:-1] / len_err[1:]) >= 1.9)
    assert area_err[0] / area_err[1] >= 3.5


def test_refinement_keeps_tags_and_projects_bottom():
    d = sine_domain()
    f = refine(generate_mesh(d, R0 / 4))
    bottom = f.vertices[f.vertices_on(TAG_I)]
    assert np.allclose(bottom[:, 1], d.phi(bottom[:, 0]), atol=1e-14)
    assert np.sum(f.edge_tags == TAG_SIGMA) % 2 == 0
    assert np.all(f.triangle_areas() > 0)


def test_template_reuses_connectivity():
    d = sine_domain()
    base = generate_mesh(d, R0 / 4)
    other = generate_mesh(sine_domain(0.04), R0 / 4, template=base)
    assert np.array_equal(base.triangles, other.triangles)
    assert other.grid_shape == base.grid_shape


def test_generation_is_deterministic():
    d = sine_domain()
    a, b = generate_mesh(d, R0 / 4), generate_mesh(d, R0 / 4)
    assert np.array_equal(a.vertices, b.vertices) and np.array_equal(a.triangles, b.triangles)


def test_mesh_export_round_trip(tmp_path, flat_domain):
    m = generate_mesh(flat_domain, 0.25, enforce_resolution=False)
    path = tmp_path / "mesh.txt"
    write_mesh(path, m)
    v, t, e, tags = read_mesh_tables(path)
    assert np.array_equal(v, m.vertices) and np.array_equal(t, m.triangles)
    assert np.array_equal(e, m.boundary_edges) and list(tags) == list(m.edge_tags)
