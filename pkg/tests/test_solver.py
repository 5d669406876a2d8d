import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrolab import assembly
from corrolab.boundary_data import ConstantField, FluxSpec, ImpedanceSpec, ScaledFlux, SmoothImpedance, SmoothOnset
from corrolab.errors import IncompatibleTraces, WindowOffGrid
from corrolab.mesh import TAG_A, TAG_I, generate_mesh
from corrolab.solver import (
    Field,
    MeasurementTrace,
    SolverConfig,
    TimeGrid,
    _p1_mass_1d,
    boundary_trace,
    energy_balance_residual,
    normal_derivative,
    solve_forward,
    total_heat,
    trace_distance,
    write_snapshots,
)

from oracles import bilinear_trace_norm2, cosine_mms

R0 = 0.1
ZERO_GAMMA = ImpedanceSpec.constant(0.0, 1.0)


def _flux(g, name="g"):
    return FluxSpec(g, 1.0, 0.25, 4.0, 0.05, R0, name)


@pytest.fixture(scope="module")
def coarse(flat_domain):
    return generate_mesh(flat_domain, R0 / 4)


def _orders(errs):
    errs = np.asarray(errs)
    return np.log2(errs[:-1] / errs[1:])


def test_time_grid():
    grid = TimeGrid(1.0, 40)
    assert grid.dt == 0.025
    assert grid.index_of(0.25) == 10
    with pytest.raises(WindowOffGrid):
        grid.index_of(0.2501)
    with pytest.raises(ValueError):
        SolverConfig(theta=0.4)


def test_zero_flux_gives_zero(coarse):
    u = solve_forward(coarse, ImpedanceSpec.constant(5.0), _flux(ConstantField(0.0)), TimeGrid(1.0, 10))
    assert np.all(u.values == 0.0)
    assert not u.values.flags.writeable


def test_heat_conservation_insulated(coarse):
    # gamma = 0 and uniform flux c on A: total heat is c |A| t exactly
    c = 0.7
    u = solve_forward(coarse, ZERO_GAMMA, _flux(ConstantField(c)), TimeGrid(1.0, 20))
    length_A = coarse.edge_lengths(TAG_A).sum()
    assert length_A == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(total_heat(u), c * 3.0 * u.grid.times, rtol=1e-10, atol=1e-12)


def test_energy_balance_curved_smooth_impedance(setup):
    mesh = generate_mesh(setup.domain, R0 / 4)
    gamma = ImpedanceSpec(SmoothImpedance(0.3, 0.2, R0, slope=1.0), 10.0, False, "smooth")
    u = solve_forward(mesh, gamma, setup.gt, TimeGrid(1.0, 40))
    assert energy_balance_residual(u).max() <= 1e-10
    half = solve_forward(mesh, setup.gamma, setup.g, TimeGrid(1.0, 4), SolverConfig(theta=0.5))
    with pytest.raises(ValueError):
        energy_balance_residual(half)


def test_linearity_and_determinism(coarse, setup):
    g = _flux(setup.g.g)
    grid = TimeGrid(1.0, 20)
    gamma = ImpedanceSpec.constant(5.0)
    u = solve_forward(coarse, gamma, g, grid)
    again = solve_forward(coarse, gamma, g, grid)
    assert np.array_equal(u.values, again.values)
    doubled = solve_forward(coarse, gamma, _flux(ScaledFlux(g, 2.0)), grid)
    np.testing.assert_allclose(doubled.values, 2 * u.values, rtol=1e-11, atol=1e-14)


def test_trace_of_constant_field(coarse, setup):
    grid = TimeGrid(1.0, 20)
    f = Field(coarse, grid, np.ones((21, coarse.n_vertices)), 1.0, setup.gamma, setup.g)
    tr = boundary_trace(f)
    assert tr.sigma_length == pytest.approx(0.4, abs=1e-12)
    assert tr.duration == pytest.approx(0.75)
    assert tr.squared_norm() == pytest.approx(0.4 * 0.75, rel=1e-12)
    assert tr.weights.sum() == pytest.approx(0.3, rel=1e-12)
    with pytest.raises(WindowOffGrid):
        boundary_trace(f, (0.5, 0.5))


def test_trace_distance_frozen():
    x = np.linspace(0.3, 0.7, 17)
    t = np.linspace(0.25, 1.0, 31)
    rng = np.random.default_rng(7)
    a_vals, b_vals = rng.standard_normal((31, 17)), rng.standard_normal((31, 17))
    a = MeasurementTrace(x, t, a_vals, _p1_mass_1d(x), _p1_mass_1d(t))
    b = a.with_values(b_vals)
    assert a.squared_norm(a_vals - b_vals) == pytest.approx(bilinear_trace_norm2(x, t, a_vals - b_vals), rel=1e-12)
    assert trace_distance(a, b, R0) == pytest.approx(48.520674946506084, rel=1e-12)
    with pytest.raises(IncompatibleTraces):
        trace_distance(a, MeasurementTrace(x[1:], t, b_vals[:, 1:], _p1_mass_1d(x[1:]), _p1_mass_1d(t)), R0)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_trace_norm_matches_tensor_gauss(nx, nt, seed):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0, 1, nx))
    t = np.sort(rng.uniform(0, 1, nt))
    if np.min(np.diff(x)) < 1e-3 or np.min(np.diff(t)) < 1e-3:
        return
    v = rng.standard_normal((nt, nx))
    tr = MeasurementTrace(x, t, v, _p1_mass_1d(x), _p1_mass_1d(t))
    assert tr.squared_norm() == pytest.approx(bilinear_trace_norm2(x, t, v), rel=1e-10)


def test_resampling_identity(coarse, setup):
    u = solve_forward(coarse, setup.gamma, setup.g, TimeGrid(1.0, 20))
    tr = boundary_trace(u)
    np.testing.assert_allclose(tr.resampled(tr).values, tr.values)


def test_manufactured_spatial_order(flat_domain):
    exact, V = cosine_mms(lambda t: t, lambda t: 1.0 + 0 * t, 5.0)
    zero = _flux(ConstantField(0.0))
    gamma = ImpedanceSpec.constant(5.0)
    errs = []
    for n in (10, 20, 40):
        mesh = generate_mesh(flat_domain, 1.0 / n, enforce_resolution=False)
        u = solve_forward(mesh, gamma, zero, TimeGrid(1.0, n), SolverConfig(theta=0.5, verification=V))
        errs.append(assembly.l2_error(mesh, u.values[-1], lambda p: exact(p, 1.0)))
    assert np.all(_orders(errs) >= 1.8)


def test_trace_self_convergence_crank_nicolson(setup):
    flux = FluxSpec(SmoothOnset(setup.g, 0.5), 1.0, 0.25, 4.0, 0.05, R0, "smooth")
    prev, errs = None, []
    for k in (2, 4, 8, 16):
        h = R0 / k
        mesh = generate_mesh(setup.domain, h, enforce_resolution=False)
        u = solve_forward(mesh, setup.gamma, flux, TimeGrid(1.0, int(round(1 / h))), SolverConfig(theta=0.5))
        tr = boundary_trace(u, (0.25, 1.0))
        if prev is not None:
            ix = np.searchsorted(tr.x, prev.x)
            it = np.searchsorted(tr.times, prev.times - 1e-12)
            np.testing.assert_allclose(tr.x[ix], prev.x, atol=1e-12)
            errs.append(np.sqrt(prev.squared_norm(prev.values - tr.values[np.ix_(it, ix)])))
        prev = tr
    assert np.all(_orders(errs) >= 1.5), errs


def test_accessible_flux_recovery_converges(setup, ladder):
    errs = []
    for k in (4, 8, 16):
        _, u, _ = ladder[k]
        bf = normal_derivative(u, TAG_A)
        errs.append(max(bf.l2_error(setup.g, n) for n in range(len(bf.times))))
    assert np.all(_orders(errs) >= 1.0), errs


def test_impedance_side_recovery(setup, ladder):
    _, u, _ = ladder[4]
    bf = normal_derivative(u, TAG_I)
    # constant gamma: du/dnu = -gamma u reproduced to solver accuracy
    np.testing.assert_allclose(bf.values, -5.0 * u.values[1:, bf.vertex_ids], rtol=1e-8, atol=1e-10)
    insulated = solve_forward(u.mesh, ZERO_GAMMA, setup.g, u.grid)
    assert np.abs(normal_derivative(insulated, TAG_I).values).max() <= 1e-10


def test_snapshot_export(tmp_path, coarse, setup):
    u = solve_forward(coarse, setup.gamma, setup.g, TimeGrid(1.0, 4))
    path = tmp_path / "snap.txt"
    write_snapshots(u, path, every=2)
    blocks = [ln for ln in path.read_text().splitlines() if ln.startswith("# step")]
    assert blocks == ["# step 0 t=0.0", "# step 2 t=0.5", "# step 4 t=1.0"]
    rows = np.loadtxt(path)
    np.testing.assert_array_equal(rows[-coarse.n_vertices:, 2], u.values[-1])
