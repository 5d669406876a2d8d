"""End-to-end stability experiments: boundary perturbation sweeps, rate
fits, impedance recovery and least-squares boundary reconstruction."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .analysis import InequalityReport
from .boundary_data import FluxSpec, ImpedanceSpec, ModulatedFlux, PlateauFlux
from .errors import (
    AssumptionViolated,
    CorrolabError,
    DegenerateFit,
    DenominatorTooSmall,
    InsufficientPoints,
    LineSearchStalled,
    NoMatchedPairs,
)
from .geometry import BoundaryProfile, build_domain, bump_mode, distance_report, hausdorff_distance
from .mesh import TAG_I, generate_mesh, grid_shape_for
from .solver import SolverConfig, TimeGrid, boundary_trace, normal_derivative, solve_forward, trace_distance

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ProblemSetup:
    domain: object
    g: FluxSpec
    gt: FluxSpec
    gamma: ImpedanceSpec

    @property
    def T(self):
        return self.g.T

    @property
    def t1(self):
        return self.g.t1


def default_profile(W=1.0, r0=0.1, L=1.0, amplitude=None):
    """Gently curved bottom: a single bump of height ``0.2 r0`` away from the corners."""
    amplitude = 0.2 * r0 if amplitude is None else amplitude
    return BoundaryProfile.from_function(lambda x: amplitude * bump_mode(W, 2 * r0)(x), W, r0, L)


def default_setup(W=1.0, H=1.0, r0=0.1, L=1.0, M=120.0, profile=None, Phi1=0.05, E=4.0,
                  contrast=1.0, shape="space", gamma=5.0, gamma_bar=None, T=1.0, t1=0.25, sigma=None):
    """Validated domain, flux pair and impedance used by the experiments.

    ``gamma`` is a number (constant impedance) or an :class:`ImpedanceSpec`.
    """
    profile = default_profile(W, r0, L) if profile is None else profile
    domain = build_domain(profile, W, H, (r0, L, M), sigma=sigma)
    base = PlateauFlux(Phi1 / r0, r0, domain.phi, W, T=T)
    g = FluxSpec(base, T, t1, E, Phi1, r0, "g")
    gt = FluxSpec(ModulatedFlux(base, contrast, t1, T, shape, W), T, t1, E, Phi1, r0, "g~")
    if not isinstance(gamma, ImpedanceSpec):
        gamma = ImpedanceSpec.constant(gamma, 2 * gamma if gamma_bar is None else gamma_bar)
    return ProblemSetup(domain, g, gt, gamma)


# ---------------------------------------------------------------- sweep


@dataclass(frozen=True, eq=False)
class PerturbationFamily:
    base: BoundaryProfile
    mode: object
    amplitudes: tuple

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        if any(a < 0 for a in amps):
            raise ValueError("perturbation amplitudes must be nonnegative")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def halving(cls, base, start, n, mode=None, margin=None):
        """``n`` amplitudes ``start, start/2, ...`` of a single bump mode."""
        margin = 2 * base.r0 if margin is None else margin
        mode = bump_mode(base.width, margin) if mode is None else mode
        return cls(base, mode, tuple(start / 2**k for k in range(n)))

    def profile(self, amplitude):
        return self.base.perturbed(self.mode, amplitude)


@dataclass(frozen=True)
class SweepConfig:
    h: float
    steps: int
    theta: float = 1.0
    tol: float = 1e-10
    resolution: Optional[float] = None
    workers: int = 1
    impedance: bool = True


@dataclass(frozen=True)
class StabilityRecord:
    delta: float
    epsilon: float
    d_H: float
    d_m: float
    d_boundary: float
    runtime: float
    epsilon_per_flux: tuple = ()
    impedance_gap: float = float("nan")
    error: Optional[str] = None

    COLUMNS = ("delta", "epsilon", "d_H", "d_m", "d_boundary", "runtime")

    @property
    def ok(self):
        return self.error is None

    def csv_row(self):
        return ",".join(f"{getattr(self, c):.12g}" for c in self.COLUMNS)


@dataclass(frozen=True)
class RateFit:
    """``d_H / r0 ~ C |log eps|^-beta`` in least squares, plus its upper envelope.

    ``C_envelope`` is the smallest constant for which the fitted exponent
    bounds every record.
    """

    C: float
    beta: float
    r_squared: float
    n_points: int
    C_envelope: float

    def eta(self, eps, envelope=False):
        c = self.C_envelope if envelope else self.C
        return c * np.abs(np.log(eps)) ** (-self.beta)

    def footer(self):
        return [f"# rate_fit,C={self.C:.12g},beta={self.beta:.12g},r_squared={self.r_squared:.12g},"
                f"n_points={self.n_points},C_envelope={self.C_envelope:.12g}"]


def _domain_traces(domain, setup, cfg, template, grid):
    mesh = generate_mesh(domain, cfg.h, template=template)
    solver_cfg = SolverConfig(theta=cfg.theta, tol=cfg.tol)
    u = solve_forward(mesh, setup.gamma, setup.g, grid, solver_cfg)
    ut = solve_forward(mesh, setup.gamma, setup.gt, grid, solver_cfg)
    return u, (boundary_trace(u), boundary_trace(ut))


def _sweep_point(args):
    delta, family, setup, cfg, template, base_traces, base_impedance = args
    start = time.perf_counter()
    domain = setup.domain
    try:
        other = domain.with_profile(family.profile(delta))
        grid = TimeGrid(setup.T, cfg.steps)
        u, traces = _domain_traces(other, setup, cfg, template, grid)
        eps = tuple(trace_distance(a, b, domain.r0) for a, b in zip(base_traces, traces))
        resolution = cfg.resolution or (min(domain.r0 / 200, delta / 10) if delta > 0 else domain.r0 / 200)
        dist = distance_report(domain, other, resolution)
        gap = float("nan")
        if cfg.impedance and base_impedance is not None:
            rec = recover_impedance(u)
            gap = impedance_stability_check(base_impedance, rec, max(dist.d_H, 1e-15)).lhs
        return StabilityRecord(delta, max(eps), dist.d_H, dist.d_m, dist.d_boundary,
                               time.perf_counter() - start, eps, gap)
    except CorrolabError as exc:
        log.warning("sweep point delta=%g failed: %s", delta, exc)
        nan = float("nan")
        return StabilityRecord(delta, nan, nan, nan, nan, time.perf_counter() - start, error=f"{type(exc).__name__}: {exc}")


def run_stability_sweep(setup, family, cfg):
    """Solve both fluxes on the base and every perturbed domain; return records by decreasing amplitude.

    Perturbed domains reuse the connectivity of the base mesh, so ``eps``
    depends smoothly on the amplitude.  Base solves happen once.  A failing
    amplitude yields a record with ``error`` set.
    """
    grid = TimeGrid(setup.T, cfg.steps)
    template = generate_mesh(setup.domain, cfg.h)
    u_base, base_traces = _domain_traces(setup.domain, setup, cfg, template, grid)
    base_impedance = recover_impedance(u_base) if cfg.impedance else None
    tasks = [(d, family, setup, cfg, template, base_traces, base_impedance) for d in family.amplitudes]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_sweep_point, tasks))
    else:
        records = [_sweep_point(t) for t in tasks]
    return sorted(records, key=lambda r: -r.delta)


def fit_log_rate(records, r0):
    """Least-squares fit of ``log(d_H/r0)`` against ``log|log eps|``."""
    pts = [(r.epsilon, r.d_H) for r in records
           if r.ok and 0 < r.epsilon < 1 and r.d_H > 0 and np.isfinite(r.epsilon)]
    if len(pts) < 4:
        raise InsufficientPoints(f"rate fit needs at least 4 records with 0 < eps < 1 and d_H > 0, got {len(pts)}")
    eps, dh = np.array(pts).T
    x = np.log(np.abs(np.log(eps)))
    y = np.log(dh / r0)
    if np.ptp(x) <= 1e-14 * max(1.0, np.abs(x).max()):
        raise DegenerateFit("all records share the same |log eps|")
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    beta = -slope
    c_env = float(np.max(dh / r0 * np.abs(np.log(eps)) ** beta))
    return RateFit(float(np.exp(intercept)), float(beta), r2, len(pts), c_env)


def write_sweep_csv(path, records, fit=None):
    with open(path, "w") as fh:
        fh.write(",".join(StabilityRecord.COLUMNS) + "\n")
        for r in records:
            fh.write(r.csv_row() + "\n")
        if fit is not None:
            fh.write("\n".join(fit.footer()) + "\n")


# ----------------------------------------------------------- impedance


@dataclass(frozen=True, eq=False)
class ImpedanceRecord:
    """Recovered ``gamma = -(du/dnu)/u`` on I vertices at the flux-recovery times in ``(t1, T]``."""

    vertex_ids: np.ndarray
    points: np.ndarray
    times: np.ndarray
    values: np.ndarray
    b0: float
    domain: object

    def interior_mask(self):
        """Vertices of ``I^{r0}``: farther than r0 from the accessible boundary."""
        return self.domain.distance_to_accessible(self.points) > self.domain.r0

    def sup_error(self, gamma):
        """Largest ``|gamma_hat - gamma|`` over ``I^{r0}`` and all recorded times."""
        mask = self.interior_mask()
        worst = 0.0
        for k, t in enumerate(self.times):
            exact = gamma(self.points[mask], t)
            worst = max(worst, float(np.max(np.abs(self.values[k, mask] - exact))))
        return worst

    def rows(self):
        for j in np.nonzero(self.interior_mask())[0]:
            for k, t in enumerate(self.times):
                yield int(self.vertex_ids[j]), float(t), float(self.values[k, j])


def recover_impedance(u, t1=None, rel_threshold=1e-10):
    """``gamma_hat = -(du/dnu)/u`` on the I vertices, from the variational flux."""
    t1 = u.flux.t1 if t1 is None else t1
    flux = normal_derivative(u, TAG_I)
    theta = u.theta
    keep = flux.times > t1 + 1e-12
    steps = np.nonzero(keep)[0]
    ids = flux.vertex_ids
    den = theta * u.values[steps + 1][:, ids] + (1 - theta) * u.values[steps][:, ids]
    b0 = float(den.min())
    if not b0 > rel_threshold * max(float(np.abs(den).max()), 1e-300):
        raise DenominatorTooSmall(f"u drops to {b0:.3g} on I after t1")
    gamma_hat = -flux.values[steps] / den
    return ImpedanceRecord(ids, u.mesh.vertices[ids], flux.times[steps], gamma_hat, b0, u.mesh.domain)


def impedance_stability_check(rec1, rec2, d, eta=None):
    """``sup |gamma2(Q,t) - gamma1(P,t)|`` over ``P in I1^{r0}``, ``Q in I2^{r0}``, ``|P - Q| <= 2d``."""
    if len(rec1.times) != len(rec2.times) or not np.allclose(rec1.times, rec2.times):
        raise ValueError("impedance records must share recovery times")
    m1, m2 = rec1.interior_mask(), rec2.interior_mask()
    p_idx, q_idx = np.nonzero(m1)[0], np.nonzero(m2)[0]
    tree = cKDTree(rec2.points[q_idx])
    matches = tree.query_ball_point(rec1.points[p_idx], 2 * d)
    pairs = [(p, q_idx[q]) for p, qs in zip(p_idx, matches) for q in qs]
    if not pairs:
        raise NoMatchedPairs(f"no vertex pair of I^r0 within 2d = {2 * d:.3g}")
    P, Q = np.array(pairs).T
    gap = float(np.max(np.abs(rec2.values[:, Q] - rec1.values[:, P])))
    rhs = float("inf") if eta is None else float(eta)
    return InequalityReport("impedance_stability", gap, rhs, np.nan, np.nan, bool(np.isfinite(gap) and gap <= rhs),
                            {"d": d, "pairs": len(pairs)})


def write_impedance_csv(path, rec):
    with open(path, "w") as fh:
        fh.write("P_index,t,gamma_hat\n")
        for vid, t, v in rec.rows():
            fh.write(f"{vid},{t:.12g},{v:.12g}\n")


# ------------------------------------------------------- reconstruction


@dataclass(frozen=True)
class ReconstructionConfig:
    h: float
    steps: int
    n_modes: int = 3
    weight: float = 1e-6
    max_iter: int = 15
    fd_step: float = 1e-4
    tol: float = 1e-12
    margin: Optional[float] = None

    def __post_init__(self):
        if not 1 <= self.n_modes <= 12:
            raise ValueError("reconstruction uses between 1 and 12 mode coefficients")


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    profile: BoundaryProfile
    coefficients: np.ndarray
    objective: float
    history: tuple
    iterations: int
    stalled: bool = False
    message: str = ""


def synthetic_measurements(setup, profile, h, steps, noise=0.0, rng=None, finer=True):
    """Sigma traces of both fluxes for ``profile``.

    With ``finer`` the data come from a mesh one refinement level finer than
    the inversion mesh of size ``h``, so inversion does not reuse the
    discretisation that produced its data.
    """
    domain = setup.domain.with_profile(profile)
    nx, ny = grid_shape_for(setup.domain, h)
    if finer:
        mesh = generate_mesh(domain, h / 2, grid_shape=(2 * nx, 2 * ny))
    else:
        mesh = generate_mesh(domain, h, grid_shape=(nx, ny))
    grid = TimeGrid(setup.T, steps)
    traces = []
    for flux in (setup.g, setup.gt):
        tr = boundary_trace(solve_forward(mesh, setup.gamma, flux, grid))
        if noise > 0:
            rng = np.random.default_rng() if rng is None else rng
            tr = tr.with_values(tr.values + noise * rng.standard_normal(tr.values.shape))
        traces.append(tr)
    return tuple(traces)


class _Inversion:
    def __init__(self, measurements, setup, initial, cfg):
        self.setup, self.initial, self.cfg = setup, initial, cfg
        margin = 2 * setup.domain.r0 if cfg.margin is None else cfg.margin
        self.modes = [bump_mode(initial.width, margin, k) for k in range(1, cfg.n_modes + 1)]
        self.template = generate_mesh(setup.domain.with_profile(initial), cfg.h)
        self.grid = TimeGrid(setup.T, cfg.steps)
        self.meas = measurements
        self._factors = None

    def profile(self, c):
        x = self.initial.knots
        y = self.initial.values + sum(ck * m(x) for ck, m in zip(c, self.modes))
        return BoundaryProfile(x, y, self.initial.r0, self.initial.L)

    def residual(self, c):
        """Residual vector whose squared norm is the consistent-mass ``L2(Sigma x window)`` misfit."""
        try:
            domain = self.setup.domain.with_profile(self.profile(c))
            mesh = generate_mesh(domain, self.cfg.h, template=self.template)
        except (AssumptionViolated, CorrolabError):
            return None
        traces = [boundary_trace(solve_forward(mesh, self.setup.gamma, f, self.grid)) for f in (self.setup.g, self.setup.gt)]
        if self._factors is None:
            # Sigma nodes do not move with the profile: resample the data once
            tr = traces[0]
            self._factors = (np.linalg.cholesky(tr.time_mass), np.linalg.cholesky(tr.space_mass))
            self.meas = tuple(m if m.values.shape == tr.values.shape else m.resampled(tr) for m in self.meas)
        Lt, Lx = self._factors
        parts = [(Lt.T @ (tr.values - m.values) @ Lx).ravel() for tr, m in zip(traces, self.meas)]
        reg = np.sqrt(self.cfg.weight) * np.asarray(c)
        return np.concatenate(parts + [reg])

    def objective(self, r):
        return np.inf if r is None else 0.5 * float(r @ r)


def reconstruct_boundary(measurements, setup, initial, cfg):
    """Gauss-Newton output least squares over bump-mode coefficients.

    The misfit is half the sum over both fluxes of the squared
    ``L2(Sigma x window)`` trace distance plus ``weight/2 |c|^2``.
    Candidates whose profile fails the domain validation are rejected by the
    line search, so every returned profile is admissible.
    """
    inv = _Inversion(measurements, setup, initial, cfg)
    c = np.zeros(cfg.n_modes)
    r = inv.residual(c)
    if r is None:
        raise AssumptionViolated("initial profile does not give a valid domain")
    J_best = inv.objective(r)
    history = [J_best]
    stalled, message, it = False, "", 0
    for it in range(1, cfg.max_iter + 1):
        if J_best <= cfg.tol:
            message = "objective below tolerance"
            break
        jac = np.empty((len(r), cfg.n_modes))
        for k in range(cfg.n_modes):
            step = np.zeros(cfg.n_modes)
            step[k] = cfg.fd_step
            rk = inv.residual(c + step)
            if rk is None:
                rk = inv.residual(c - step)
                jac[:, k] = (r - rk) / cfg.fd_step if rk is not None else 0.0
            else:
                jac[:, k] = (rk - r) / cfg.fd_step
        dc, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        alpha, accepted = 1.0, False
        while alpha > 1e-4:
            r_new = inv.residual(c + alpha * dc)
            J_new = inv.objective(r_new)
            if J_new < J_best:
                c, r, J_best, accepted = c + alpha * dc, r_new, J_new, True
                break
            alpha /= 2
        history.append(J_best)
        if not accepted:
            stalled = True
            message = str(LineSearchStalled(f"no decrease along the Gauss-Newton step at iteration {it}"))
            log.warning(message)
            break
        if history[-2] - J_best <= 1e-10 * history[-2]:
            message = "relative decrease below 1e-10"
            break
    else:
        message = "iteration cap reached"
    return ReconstructionResult(inv.profile(c), c, J_best, tuple(history), it, stalled, message)


def reconstruction_gain(setup, initial, recovered, target, resolution=None):
    """``(d_H(initial, target), d_H(recovered, target))``."""
    dom = setup.domain
    t = dom.with_profile(target)
    return (hausdorff_distance(dom.with_profile(initial), t, resolution),
            hausdorff_distance(dom.with_profile(recovered), t, resolution))
