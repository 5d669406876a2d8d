"""Forward heat problem with prescribed flux on A and a Robin condition on I.

Weak form, for every P1 test function ``v``::

    int u_t v + int grad u . grad v + int_I gamma u v = int_A g v

with zero initial temperature, discretised by the theta-scheme.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import assembly
from .errors import IncompatibleTraces, NonFiniteValue, SingularSystem, WindowOffGrid
from .mesh import TAG_A, TAG_I, TAG_SIGMA


@dataclass(frozen=True)
class TimeGrid:
    T: float
    steps: int

    @property
    def dt(self):
        return self.T / self.steps

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.steps + 1)

    def index_of(self, t, tol=1e-9):
        k = int(round(t / self.dt))
        if k < 0 or k > self.steps or abs(k * self.dt - t) > tol * max(self.T, 1.0):
            raise WindowOffGrid(f"time {t} is not a grid point of dt = {self.dt}")
        return k


@dataclass(frozen=True)
class VerificationSource:
    """Manufactured-solution hooks; never used by experiment paths.

    ``source(x, t)`` is added to the right side of the heat equation and
    ``robin_data(x, t)`` replaces the zero right side of the Robin condition.
    """

    source: Optional[Callable] = None
    robin_data: Optional[Callable] = None


@dataclass(frozen=True)
class SolverConfig:
    theta: float = 1.0
    tol: float = 1e-10
    verification: Optional[VerificationSource] = None

    def __post_init__(self):
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [1/2, 1]")
        if self.tol <= 0:
            raise ValueError("linear tolerance must be positive")


@dataclass(frozen=True, eq=False)
class Field:
    mesh: object
    grid: TimeGrid
    values: np.ndarray
    theta: float
    gamma: object = None
    flux: object = None
    verification: Optional[VerificationSource] = None

    def __post_init__(self):
        self.values.setflags(write=False)
        if self.values.shape != (self.grid.steps + 1, self.mesh.n_vertices):
            raise ValueError("field values must be (steps + 1) x vertices")

    @property
    def scheme(self):
        return {1.0: "backward-euler", 0.5: "crank-nicolson"}.get(self.theta, f"theta={self.theta}")

    def at(self, t):
        return self.values[self.grid.index_of(t)]

    def window(self, t_start, t_end=None):
        t_end = self.grid.T if t_end is None else t_end
        return self.grid.index_of(t_start), self.grid.index_of(t_end)

    def with_values(self, values):
        return Field(self.mesh, self.grid, np.array(values, dtype=float), self.theta,
                     self.gamma, self.flux, self.verification)


class _Operators:
    """Time-independent matrices of one mesh, built once per solve."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.M = assembly.mass_matrix(mesh)
        self.K = assembly.stiffness_matrix(mesh)
        self.edges_A = mesh.edges_on(TAG_A)
        self.edges_I = mesh.edges_on(TAG_I)

    def robin(self, gamma, t):
        return assembly.boundary_mass_matrix(self.mesh, self.edges_I, lambda p: gamma(p, t))

    def flux_load(self, flux, t):
        return assembly.boundary_load(self.mesh, self.edges_A, lambda p: flux(p, t))

    def source_load(self, verification, t):
        if verification is None or verification.source is None:
            return np.zeros(self.mesh.n_vertices)
        return assembly.domain_load(self.mesh, lambda p: verification.source(p, t))

    def robin_data_load(self, verification, t):
        if verification is None or verification.robin_data is None:
            return np.zeros(self.mesh.n_vertices)
        return assembly.boundary_load(self.mesh, self.edges_I, lambda p: verification.robin_data(p, t))

    def load(self, flux, t, verification=None):
        F = self.flux_load(flux, t)
        if verification is not None:
            F = F + self.source_load(verification, t) + self.robin_data_load(verification, t)
        return F


def solve_forward(mesh, gamma, flux, grid, config=None):
    """Theta-scheme solution of the forward problem from zero initial data."""
    config = SolverConfig() if config is None else config
    theta, dt = config.theta, grid.dt
    ops = _Operators(mesh)
    times = grid.times
    u = np.zeros((grid.steps + 1, mesh.n_vertices))

    R_prev = ops.robin(gamma, 0.0)
    F_prev = ops.load(flux, 0.0, config.verification)
    lu, lhs = None, None
    for n in range(grid.steps):
        t_next = times[n + 1]
        R_next = ops.robin(gamma, t_next) if gamma.time_dependent else R_prev
        F_next = ops.load(flux, t_next, config.verification)
        if lu is None or gamma.time_dependent:
            lhs = (ops.M + theta * dt * (ops.K + R_next)).tocsc()
            try:
                lu = splu(lhs)
            except RuntimeError as exc:
                raise SingularSystem(str(exc)) from exc
        rhs = ops.M @ u[n] + dt * (theta * F_next + (1 - theta) * F_prev)
        if theta < 1:
            rhs -= (1 - theta) * dt * ((ops.K + R_prev) @ u[n])
        u[n + 1] = lu.solve(rhs)
        if not np.all(np.isfinite(u[n + 1])):
            raise NonFiniteValue(f"non-finite temperature at step {n + 1}")
        scale = np.linalg.norm(rhs)
        if scale > 0:
            res = np.linalg.norm(lhs @ u[n + 1] - rhs)
            if res > config.tol * scale:
                # one step of iterative refinement before giving up
                u[n + 1] += lu.solve(rhs - lhs @ u[n + 1])
                res = np.linalg.norm(lhs @ u[n + 1] - rhs)
                if res > config.tol * scale:
                    raise SingularSystem(f"relative residual {res / scale:.2e} above {config.tol:.1e} at step {n + 1}")
        R_prev, F_prev = R_next, F_next
    return Field(mesh, grid, u, theta, gamma, flux, config.verification)


@dataclass(frozen=True, eq=False)
class MeasurementTrace:
    """Values of ``u`` on Sigma over a time window, with consistent P1 mass matrices.

    ``space_mass`` and ``time_mass`` integrate the space-time piecewise
    bilinear interpolant exactly; their row sums are the quadrature weights.
    """

    x: np.ndarray
    times: np.ndarray
    values: np.ndarray
    space_mass: np.ndarray
    time_mass: np.ndarray

    @property
    def weights(self):
        return np.outer(self.time_mass.sum(axis=1), self.space_mass.sum(axis=1))

    @property
    def sigma_length(self):
        return float(self.space_mass.sum())

    @property
    def duration(self):
        return float(self.times[-1] - self.times[0])

    def squared_norm(self, values=None):
        d = self.values if values is None else values
        return float(np.sum((self.time_mass @ d) * (d @ self.space_mass)))

    def with_values(self, values):
        return MeasurementTrace(self.x, self.times, np.asarray(values, dtype=float), self.space_mass, self.time_mass)

    def resampled(self, other):
        """Linear interpolation of this trace onto the Sigma nodes of ``other``."""
        if len(self.times) != len(other.times) or not np.allclose(self.times, other.times):
            raise IncompatibleTraces("traces must share their time nodes")
        vals = np.array([np.interp(other.x, self.x, row) for row in self.values])
        return other.with_values(vals)


def _p1_mass_1d(nodes):
    h = np.diff(nodes)
    n = len(nodes)
    Mx = np.zeros((n, n))
    i = np.arange(n - 1)
    Mx[i, i] += h / 3
    Mx[i + 1, i + 1] += h / 3
    Mx[i, i + 1] += h / 6
    Mx[i + 1, i] += h / 6
    return Mx


def sigma_nodes(mesh):
    """Sigma vertex ids ordered by abscissa, with their abscissae."""
    ids = mesh.vertices_on(TAG_SIGMA)
    order = np.argsort(mesh.vertices[ids, 0])
    ids = ids[order]
    return ids, mesh.vertices[ids, 0]


def boundary_trace(field, window=None):
    """Restriction of ``field`` to Sigma on ``window = (t_start, t_end)``."""
    t_start, t_end = (field.flux.t1 if field.flux is not None else 0.0, field.grid.T) if window is None else window
    k0, k1 = field.grid.index_of(t_start), field.grid.index_of(t_end)
    if k1 <= k0:
        raise WindowOffGrid("measurement window must contain at least one time step")
    ids, x = sigma_nodes(field.mesh)
    times = field.grid.times[k0:k1 + 1]
    values = np.array(field.values[k0:k1 + 1][:, ids])
    return MeasurementTrace(x, times, values, _p1_mass_1d(x), _p1_mass_1d(times))


def trace_distance(a, b, r0, dim=2):
    """r0-scaled ``L2(Sigma x window)`` norm of ``a - b``."""
    if a.values.shape != b.values.shape or not (np.allclose(a.x, b.x) and np.allclose(a.times, b.times)):
        raise IncompatibleTraces("traces must share Sigma nodes and time window")
    return r0 ** (-(dim + 2) / 2) * np.sqrt(max(a.squared_norm(a.values - b.values), 0.0))


@dataclass(frozen=True, eq=False)
class BoundaryField:
    """Nodal values on the vertices of one boundary part, per recovered time."""

    part: str
    vertex_ids: np.ndarray
    times: np.ndarray
    values: np.ndarray
    mesh: object

    def l2_error(self, exact, k):
        """``L2(part)`` distance at time index ``k`` to ``exact(points, t)``."""
        full = np.zeros(self.mesh.n_vertices)
        full[self.vertex_ids] = self.values[k]
        t = self.times[k]
        return assembly.boundary_l2_error(self.mesh, self.mesh.edges_on(self.part), full, lambda p: exact(p, t))


def normal_derivative(field, part):
    """Variationally recovered outward flux ``du/dnu`` on a boundary part.

    The discrete equation tested against each boundary hat function gives
    the flux functional ``int_dOmega (du/dnu) v``; the known contribution of
    the other part is removed and the boundary mass system of ``part`` is
    solved.  Values at step ``n`` refer to time ``t_{n-1} + theta dt``.
    """
    mesh, grid, theta = field.mesh, field.grid, field.theta
    ops = _Operators(mesh)
    edges = mesh.edges_on(part)
    ids = np.unique(edges)
    Mp = assembly.boundary_mass_matrix(mesh, edges)[ids][:, ids].tocsc()
    lu = splu(Mp)
    times = grid.times
    u = field.values
    dt = grid.dt
    out = np.zeros((grid.steps, len(ids)))
    V = field.verification
    robin = _robin_cache(ops, field.gamma)
    for n in range(grid.steps):
        t0, t = times[n], times[n + 1]

        def weighted(fn):
            return theta * fn(t) + (1 - theta) * fn(t0)

        u_th = theta * u[n + 1] + (1 - theta) * u[n]
        r = ops.M @ (u[n + 1] - u[n]) / dt + ops.K @ u_th - weighted(lambda s: ops.source_load(V, s))
        if part == TAG_I:
            r = r - weighted(lambda s: ops.flux_load(field.flux, s))
        else:
            # remove the I contribution  int_I (du/dnu) v = int_I (q - gamma u) v
            r = r + theta * (robin(t) @ u[n + 1]) + (1 - theta) * (robin(t0) @ u[n])
            r = r - weighted(lambda s: ops.robin_data_load(V, s))
        out[n] = lu.solve(r[ids])
    flux_times = times[:-1] + theta * dt
    return BoundaryField(part, ids, flux_times, out, mesh)


def _robin_cache(ops, gamma):
    if gamma.time_dependent:
        return lambda t: ops.robin(gamma, t)
    R = ops.robin(gamma, 0.0)
    return lambda t: R


def energy_balance_residual(field, flux=None, gamma=None):
    """Per-step relative defect of the discrete heat balance (test function 1).

    ``|int (u^{n+1} - u^n)/dt + int_I gamma u^{n+1} - int_A g^{n+1}|`` divided by
    the largest of the three terms.  Exact up to linear-solver error for
    ``theta = 1``.
    """
    if field.theta != 1.0:
        raise ValueError("the discrete energy identity holds for theta = 1 only")
    flux = field.flux if flux is None else flux
    gamma = field.gamma if gamma is None else gamma
    ops = _Operators(field.mesh)
    ones = np.ones(field.mesh.n_vertices)
    m = ops.M @ ones
    u, dt, times = field.values, field.grid.dt, field.grid.times
    out = np.zeros(field.grid.steps)
    R = ops.robin(gamma, 0.0)
    for n in range(field.grid.steps):
        t = times[n + 1]
        if gamma.time_dependent:
            R = ops.robin(gamma, t)
        storage = m @ (u[n + 1] - u[n]) / dt
        loss = ones @ (R @ u[n + 1])
        gain = ones @ ops.load(flux, t, field.verification)
        scale = max(abs(storage), abs(loss), abs(gain))
        out[n] = abs(storage + loss - gain) / scale if scale > 0 else 0.0
    return out


def total_heat(field):
    m = assembly.mass_matrix(field.mesh) @ np.ones(field.mesh.n_vertices)
    return field.values @ m


def write_snapshots(field, path, every=1):
    """Plain-text vertex-value tables, one block per exported step."""
    with open(path, "w") as fh:
        fh.write(f"# scheme={field.scheme} steps={field.grid.steps} T={field.grid.T!r} vertices={field.mesh.n_vertices}\n")
        for k in range(0, field.grid.steps + 1, every):
            fh.write(f"# step {k} t={float(field.grid.times[k])!r}\n")
            for (x, y), v in zip(field.mesh.vertices, field.values[k]):
                fh.write(f"{float(x)!r} {float(y)!r} {float(v)!r}\n")
