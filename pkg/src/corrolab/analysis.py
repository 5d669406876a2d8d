"""Ratio field ``lambda = u~/u - 1`` and numerical checks of the quantitative
inequalities behind the stability estimate.

Every check returns an :class:`InequalityReport`.  Norms whose constants are
fitted carry the r0 scaling of the a-priori data, so fitted constants are
dimensionless.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from . import assembly
from .errors import (
    BallNotInterior,
    DenominatorTooSmall,
    EmptyIntersection,
    GeometryViolation,
    NonPositiveField,
)
from .mesh import TAG_A, TAG_I

DIM = 2
S1_DEFAULT = 0.25


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    constant: float
    exponent: float
    passed: bool
    context: dict = field(default_factory=dict)

    COLUMNS = ("check", "parameters", "lhs", "rhs", "constant", "exponent", "pass")

    def csv_row(self):
        params = ";".join(f"{k}={_fmt(v)}" for k, v in self.context.items())
        return ",".join([self.name, params, _fmt(self.lhs), _fmt(self.rhs), _fmt(self.constant),
                         _fmt(self.exponent), "1" if self.passed else "0"])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    if isinstance(v, (tuple, list)):
        return "(" + " ".join(_fmt(x) for x in v) + ")"
    return str(v)


@dataclass(frozen=True, eq=False)
class LambdaField:
    """``lambda`` on all vertices for the grid steps ``k0 .. steps``."""

    mesh: object
    grid: object
    k0: int
    values: np.ndarray
    b0: float
    b1: float
    u: Optional[object] = None
    ut: Optional[object] = None

    @property
    def times(self):
        return self.grid.times[self.k0:]

    @property
    def t1(self):
        return float(self.grid.times[self.k0])

    def at(self, t):
        return self.values[self.grid.index_of(t) - self.k0]


def compute_lambda(u, ut, t1=None, rel_threshold=1e-10):
    """Pointwise ``ut/u - 1`` on ``[t1, T]``; records ``b0 = min u`` and ``b1 = max u``."""
    if u.mesh is not ut.mesh or u.grid != ut.grid:
        raise ValueError("u and ut must live on the same mesh and time grid")
    t1 = u.flux.t1 if t1 is None else t1
    k0 = u.grid.index_of(t1)
    den = u.values[k0:]
    b0, b1 = float(den.min()), float(den.max())
    if not b0 > rel_threshold * max(abs(b1), 1e-300):
        raise DenominatorTooSmall(f"min u on [t1, T] is {b0:.3g}; the flux assumptions fail upstream")
    lam = ut.values[k0:] / den - 1.0
    lam.setflags(write=False)
    return LambdaField(u.mesh, u.grid, k0, lam, b0, b1, u, ut)


def _dual_norm_solver(mesh, r0):
    K = assembly.stiffness_matrix(mesh)
    M = assembly.mass_matrix(mesh)
    return splu((K + M / r0**2).tocsc())


def lambda_pde_residual(lam, weighted=True):
    """Space-time dual norm of the weak residual of the lambda equation.

    For every hat function ``v`` and step ``n``::

        int w (lam^{n+1} - lam^n)/dt v + int u^2 grad lam^{n+1} . grad v
            - int_A (u g~ - u~ g) v

    with ``w = u^2`` (``weighted=True``, the form implied by the definition
    of lambda) or ``w = 1``.  No I term appears: its flux vanishes.  The
    residual is measured in the dual of ``H^1`` with the r0-scaled norm and
    accumulated in ``L2`` over ``[t1, T]``.
    """
    u, ut = lam.u, lam.ut
    mesh, grid = lam.mesh, lam.grid
    r0 = mesh.domain.r0
    edges = mesh.edges_on(TAG_A)
    pts, w, basis = assembly.edge_quadrature(mesh, edges)
    flat = pts.reshape(-1, 2)
    dual = _dual_norm_solver(mesh, r0)
    dt = grid.dt
    total = 0.0
    for j in range(1, lam.values.shape[0]):
        k = lam.k0 + j
        t = grid.times[k]
        un = u.values[k]
        u2q = assembly.evaluate_at_quadrature(mesh, un) ** 2
        S = assembly.stiffness_matrix(mesh, u2q)
        Mw = assembly.weighted_mass_matrix(mesh, u2q) if weighted else assembly.mass_matrix(mesh)
        r = Mw @ (lam.values[j] - lam.values[j - 1]) / dt + S @ lam.values[j]
        uq = un[edges] @ basis.T
        utq = ut.values[k][edges] @ basis.T
        gq = np.asarray(u.flux(flat, t)).reshape(w.shape)
        gtq = np.asarray(ut.flux(flat, t)).reshape(w.shape)
        local = np.einsum("eq,qi->ei", (uq * gtq - utq * gq) * w, basis)
        r -= np.bincount(edges.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)
        total += dt * float(r @ dual.solve(r))
    return float(np.sqrt(total))


def lower_bound_check(u, t1=None, Phi1=None):
    """Minimum of ``u`` over ``Omega x [t1, T]`` and the implied ``c0 = min u / Phi1``."""
    t1 = u.flux.t1 if t1 is None else t1
    Phi1 = u.flux.Phi1 if Phi1 is None else Phi1
    k0 = u.grid.index_of(t1)
    m = float(u.values[k0:].min())
    c0 = m / Phi1 if Phi1 > 0 else np.nan
    return InequalityReport("lower_bound", 0.0, m, c0, np.nan, bool(m > 0), {"t1": t1, "Phi1": Phi1})


class BallQuadrature:
    """Points and weights for ``int_{B_rho(c) n Omega} f`` with P1 ``f``.

    Each triangle meeting the ball is split into ``k^2`` congruent pieces
    whose centroids carry equal weights; points outside the ball are dropped.
    The candidate point set of a smaller ball is a subset of that of a larger
    one, so integrals of nonnegative fields are monotone in the radius.
    """

    def __init__(self, mesh, center, radius, k=6):
        center = np.asarray(center, dtype=float)
        p = mesh.vertices[mesh.triangles]
        lo, hi = p.min(axis=1), p.max(axis=1)
        near = np.all((lo <= center + radius) & (hi >= center - radius), axis=1)
        tri = np.nonzero(near)[0]
        bary = assembly.subtriangle_points(k)
        pts = np.einsum("qk,tkd->tqd", bary, p[tri])
        inside = np.linalg.norm(pts - center, axis=-1) < radius
        area = np.abs(mesh.triangle_areas()[tri])[:, None] / len(bary)
        t_idx, q_idx = np.nonzero(inside)
        self.points = pts[t_idx, q_idx]
        self.weights = np.broadcast_to(area, inside.shape)[t_idx, q_idx]
        rows = np.repeat(np.arange(len(t_idx)), 3)
        cols = mesh.triangles[tri[t_idx]].ravel()
        vals = bary[q_idx].ravel()
        self.interp = sp.csr_matrix((vals, (rows, cols)), shape=(len(t_idx), mesh.n_vertices))
        self.measure = float(self.weights.sum())

    def __len__(self):
        return len(self.weights)

    def integral(self, values):
        return float(self.weights @ (self.interp @ values))

    def integral_of_square(self, values):
        return float(self.weights @ (self.interp @ values) ** 2)


def _time_integral(nodes, values, a, b):
    """Trapezoid rule for a piecewise-linear-in-time sample on ``[a, b]``."""
    ts = np.concatenate([[a], nodes[(nodes > a) & (nodes < b)], [b]])
    vs = np.array([np.interp(t, nodes, values) for t in ts])
    return float(np.trapezoid(vs, ts))


def _space_time_square(lam, quad, a, b):
    per_step = np.array([quad.integral_of_square(v) for v in lam.values])
    return _time_integral(lam.times, per_step, a, b)


def lambda_mass_lower_bound(lam, x0, rho, Phi0, k=6):
    """``int_{t1}^T int_{B_rho(x0)} lambda^2`` against ``r0^{n+2} Phi0``."""
    mesh = lam.mesh
    domain = mesh.domain
    x0 = np.asarray(x0, dtype=float)
    if not domain.contains(x0)[0] or domain.distance_to_boundary(x0[None, :])[0] <= rho:
        raise BallNotInterior(f"x0 = {tuple(x0)} is not at distance > rho = {rho} from the boundary")
    quad = BallQuadrature(mesh, x0, rho, k)
    mass = _space_time_square(lam, quad, lam.t1, lam.grid.T)
    scale = domain.r0 ** (DIM + 2) * Phi0
    C_rho = mass / scale
    return InequalityReport("lambda_mass_lower_bound", 0.0, mass, C_rho, np.nan, bool(mass > 0),
                            {"x0": tuple(x0), "rho": rho, "Phi0": Phi0})


def trace_inequality_check(lam):
    """Smallest ``C`` with ``|lam|_{dOmega} <= C (r0^-1/2 |lam| + r0^1/2 |grad lam|)`` at every step."""
    mesh = lam.mesh
    r0 = mesh.domain.r0
    M = assembly.mass_matrix(mesh)
    K = assembly.stiffness_matrix(mesh)
    Mb = assembly.boundary_mass_matrix(mesh, mesh.boundary_edges)
    best, at = 0.0, None
    for j, v in enumerate(lam.values):
        b = np.sqrt(max(v @ (Mb @ v), 0.0))
        if b == 0:
            continue
        interior = r0**-0.5 * np.sqrt(max(v @ (M @ v), 0.0)) + r0**0.5 * np.sqrt(max(v @ (K @ v), 0.0))
        c = b / interior
        if c > best:
            best, at = c, (b, interior)
    if at is None:
        return InequalityReport("trace_inequality", 0.0, 0.0, 0.0, np.nan, True, {"steps": len(lam.values)})
    return InequalityReport("trace_inequality", at[0], best * at[1], best, np.nan, bool(np.isfinite(best)),
                            {"steps": len(lam.values)})


def default_windows(t_start, t_end):
    """Early and late Harnack windows: first and last third of ``[t_start, t_end]``."""
    s = (t_end - t_start) / 3
    return (t_start, t_start + s), (t_start + 2 * s, t_end)


def harnack_check(u, center, rho, early=None, late=None):
    """Empirical constant ``sup_{early} u / inf_{late} u`` on ``B_rho(center) n Omega``."""
    grid = u.grid
    if early is None or late is None:
        early, late = default_windows(u.flux.t1, grid.T)
    if not (early[0] < early[1] < late[0] < late[1] <= grid.T + 1e-12):
        raise GeometryViolation("Harnack windows must satisfy t1 < t2 < t3 < t4 <= T")
    verts = np.nonzero(np.linalg.norm(u.mesh.vertices - np.asarray(center), axis=1) <= rho)[0]
    if len(verts) == 0:
        raise EmptyIntersection("no mesh vertex inside the Harnack ball")
    times = grid.times
    tol = 1e-9 * grid.T

    def in_window(w):
        return np.nonzero((times >= w[0] - tol) & (times <= w[1] + tol))[0]

    sup = float(u.values[np.ix_(in_window(early), verts)].max())
    inf = float(u.values[np.ix_(in_window(late), verts)].min())
    if inf <= 0:
        raise NonPositiveField(f"u reaches {inf:.3g} <= 0 in the late window")
    ratio = sup / inf
    return InequalityReport("harnack", sup, ratio * inf, ratio, np.nan, bool(np.isfinite(ratio)),
                            {"center": tuple(np.asarray(center, float)), "rho": rho,
                             "early": early, "late": late})


def _feasible_constant(lhs, cyl, small, R, rho, r):
    """Smallest ``C > 1/log(R/r)`` satisfying the three-ball inequality, or ``None``."""
    ell = np.log(R / r)
    c_lo = (1.0 + 1e-9) / ell
    if lhs == 0:
        return c_lo
    if small == 0 or cyl == 0:
        return None

    def f(C):
        theta = 1.0 / (C * ell)
        return (np.log(C) + 2 * np.log(R / rho) + (1 - theta) * np.log(cyl / R**2)
                + theta * np.log(small) - np.log(lhs))

    if f(c_lo) >= 0:
        return c_lo
    c_hi = 2 * c_lo
    while f(c_hi) < 0:
        c_hi *= 2
        if c_hi > 1e12:
            return None
    return brentq(f, c_lo, c_hi, xtol=1e-14, rtol=1e-12)


def two_sphere_one_cylinder_check(lam, r, rho, R, t0, center, at_boundary=True, s1=S1_DEFAULT, k=6):
    """Fit the constant of the two-sphere one-cylinder inequality.

    Integrals: ``int_{B_rho n Omega} lam^2(t0)``, ``int_{B_r n Omega} lam^2(t0)``
    and ``int_{t0-R^2}^{t0} int_{B_R n Omega} lam^2``.  The report holds the
    smallest ``C`` for which the inequality holds with
    ``theta = 1 / (C log(R/r))`` in ``(0, 1)``.
    """
    if not (0 < r <= rho <= s1 * R):
        raise GeometryViolation(f"need 0 < r <= rho <= s1 R; got r={r}, rho={rho}, R={R}, s1={s1}")
    if t0 - R**2 < lam.t1 - 1e-12 or t0 > lam.grid.T + 1e-12:
        raise GeometryViolation(f"cylinder ({t0 - R**2:.4g}, {t0:.4g}] leaves [t1, T]")
    domain = lam.mesh.domain
    center = np.asarray(center, dtype=float)
    if at_boundary:
        if domain.distance_to_inaccessible(center[None, :])[0] > 1e-9:
            raise GeometryViolation("boundary-anchored check needs a centre on I")
        if domain.distance_to_accessible(center[None, :])[0] <= R:
            raise GeometryViolation("ball of radius R about the centre reaches the accessible boundary")
    elif not domain.contains(center)[0] or domain.distance_to_boundary(center[None, :])[0] <= R:
        raise GeometryViolation("interior check needs B_R(centre) inside Omega")

    quad_R = BallQuadrature(lam.mesh, center, R, k)
    quad_rho = BallQuadrature(lam.mesh, center, rho, k)
    quad_r = BallQuadrature(lam.mesh, center, r, k)
    if len(quad_r) == 0:
        raise EmptyIntersection(f"B_r n Omega has no quadrature points for r = {r}")
    v0 = lam.at(t0)
    lhs = quad_rho.integral_of_square(v0)
    small = quad_r.integral_of_square(v0)
    cyl = _space_time_square(lam, quad_R, t0 - R**2, t0)
    C = _feasible_constant(lhs, cyl, small, R, rho, r)
    ctx = {"r": r, "rho": rho, "R": R, "t0": t0, "at_boundary": at_boundary,
           "ball_rho": lhs, "ball_r": small, "cylinder": cyl}
    if C is None:
        return InequalityReport("two_sphere_one_cylinder", lhs, np.inf, np.inf, np.nan, False, ctx)
    theta = 1.0 / (C * np.log(R / r))
    rhs = C * R**2 / rho**2 * (cyl / R**2) ** (1 - theta) * small**theta if lhs > 0 else 0.0
    return InequalityReport("two_sphere_one_cylinder", lhs, rhs, C, theta, bool(0 < theta < 1 and lhs <= rhs * (1 + 1e-9)), ctx)


def default_three_ball_tuples(r0, T, t1):
    """Twelve ``(r, rho, R, t0)`` tuples: two cylinder radii, two times, three inner radii."""
    tuples = []
    for R in (r0, 0.8 * r0):
        rho = S1_DEFAULT * R
        for t0 in (0.5 * (t1 + T), T):
            if t0 - R**2 < t1:
                continue
            for r in (rho, rho / 2, rho / 4):
                tuples.append((r, rho, R, t0))
    return tuples
