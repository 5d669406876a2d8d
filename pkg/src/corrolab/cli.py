"""Batch entry point: ``python -m corrolab CONFIG [--mode M] [--workers N] [--out DIR]``.

Exit status: 0 when every check passes, 1 when a check fails, 2 on a
configuration error.  Each run writes into a fresh timestamped directory.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import logging
import os
import sys
import time

import numpy as np

from . import analysis
from .boundary_data import validate_flux_pair, validate_impedance
from .config import MODES, load_config
from .errors import AssumptionViolated, ConfigParseError, CorrolabError
from .experiments import (
    PerturbationFamily,
    ReconstructionConfig,
    SweepConfig,
    fit_log_rate,
    reconstruct_boundary,
    reconstruction_gain,
    recover_impedance,
    run_stability_sweep,
    synthetic_measurements,
    write_impedance_csv,
    write_sweep_csv,
)
from .geometry import assumption_report, build_domain, bump_mode
from .mesh import generate_mesh
from .solver import SolverConfig, TimeGrid, energy_balance_residual, solve_forward
from .textio import write_mesh, write_profile, write_reports

log = logging.getLogger("corrolab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser():
    p = argparse.ArgumentParser(prog="corrolab", description="Corroded-boundary stability laboratory.")
    p.add_argument("config", help="experiment configuration (INI)")
    p.add_argument("--mode", choices=MODES, help="override [experiment] mode")
    p.add_argument("--workers", type=int, help="worker processes for sweeps")
    p.add_argument("--out", help="parent directory for run outputs")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def fresh_run_dir(parent, mode):
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    base = os.path.join(parent, f"{mode}-{stamp}")
    path, k = base, 0
    while True:
        try:
            os.makedirs(path)
            return path
        except FileExistsError:
            k += 1
            path = f"{base}-{k}"


def _solve_pair(cfg, setup):
    mesh = generate_mesh(setup.domain, cfg.solver.h)
    grid = TimeGrid(setup.T, cfg.steps)
    sc = SolverConfig(theta=cfg.solver.theta, tol=cfg.solver.tol)
    return mesh, solve_forward(mesh, setup.gamma, setup.g, grid, sc), solve_forward(mesh, setup.gamma, setup.gt, grid, sc)


def run_validate(cfg, setup, out):
    lines = assumption_report(setup.domain)
    lines += list(validate_flux_pair(setup.g, setup.gt, setup.domain).checks)
    lines += validate_impedance(setup.gamma, setup.domain, setup.T)
    with open(os.path.join(out, "validation.txt"), "w") as fh:
        for label, ok, text in lines:
            fh.write(f"({label}) {'pass' if ok else 'FAIL'}: {text}\n")
    return all(ok for _, ok, _ in lines), [f"({label}) {'pass' if ok else 'FAIL'}" for label, ok, _ in lines]


def run_solve(cfg, setup, out):
    mesh, u, ut = _solve_pair(cfg, setup)
    write_mesh(os.path.join(out, "mesh.txt"), mesh)
    reports = [analysis.lower_bound_check(u), analysis.lower_bound_check(ut)]
    ok = all(r.passed for r in reports)
    summary = [f"vertices={mesh.n_vertices} steps={u.grid.steps} scheme={u.scheme}",
               f"min u on [t1,T]: {reports[0].rhs:.6g}, {reports[1].rhs:.6g}"]
    if u.theta == 1.0:
        res = max(energy_balance_residual(u).max(), energy_balance_residual(ut).max())
        ok &= res <= 1e-10
        reports.append(analysis.InequalityReport("energy_balance", float(res), 1e-10, np.nan, np.nan,
                                                 bool(res <= 1e-10), {"theta": 1.0}))
        summary.append(f"energy residual: {res:.3e}")
    write_reports(os.path.join(out, "solve.csv"), reports)
    return ok, summary


def inequality_suite(u, ut, s1=analysis.S1_DEFAULT):
    """Every quantitative check on one solved flux pair."""
    domain = u.mesh.domain
    r0, W = domain.r0, domain.W
    lam = analysis.compute_lambda(u, ut)
    xm = W / 2
    y_bottom = float(domain.phi(xm))
    reports = [analysis.lower_bound_check(u)]
    res = analysis.lambda_pde_residual(lam)
    reports.append(analysis.InequalityReport("lambda_residual", res, np.nan, np.nan, np.nan,
                                             bool(np.isfinite(res)), {"form": "weighted"}))
    reports.append(analysis.trace_inequality_check(lam))
    from .boundary_data import ratio_deviation

    Phi0 = ratio_deviation(u.flux, ut.flux, domain, 0.0, u.grid.T)
    reports.append(analysis.lambda_mass_lower_bound(lam, (xm, 0.5 * (y_bottom + domain.top)), r0, Phi0))
    reports.append(analysis.harnack_check(u, (xm, y_bottom), r0))
    for r, rho, R, t0 in analysis.default_three_ball_tuples(r0, u.grid.T, lam.t1):
        rho = min(rho, s1 * R)
        reports.append(analysis.two_sphere_one_cylinder_check(lam, min(r, rho), rho, R, t0, (xm, y_bottom), s1=s1))
    return reports


def run_inequalities(cfg, setup, out):
    _, u, ut = _solve_pair(cfg, setup)
    reports = inequality_suite(u, ut, cfg.experiment.s1)
    write_reports(os.path.join(out, "inequalities.csv"), reports)
    return all(r.passed for r in reports), [f"{r.name}: C={r.constant:.4g} {'pass' if r.passed else 'FAIL'}" for r in reports]


def run_sweep(cfg, setup, out):
    e = cfg.experiment
    family = PerturbationFamily.halving(setup.domain.profile, e.amplitude_start, e.n_amplitudes)
    sweep_cfg = SweepConfig(cfg.solver.h, cfg.steps, cfg.solver.theta, cfg.solver.tol, e.resolution, e.workers)
    records = run_stability_sweep(setup, family, sweep_cfg)
    fit = None
    try:
        fit = fit_log_rate(records, setup.domain.r0)
    except CorrolabError as exc:
        log.error("rate fit failed: %s", exc)
    write_sweep_csv(os.path.join(out, "sweep.csv"), records, fit)
    with open(os.path.join(out, "sweep_impedance.csv"), "w") as fh:
        fh.write("delta,d_H,impedance_gap\n")
        for r in records:
            fh.write(f"{r.delta:.12g},{r.d_H:.12g},{r.impedance_gap:.12g}\n")
    _, u, _ = _solve_pair(cfg, setup)
    write_impedance_csv(os.path.join(out, "impedance.csv"), recover_impedance(u))
    eps = np.array([r.epsilon for r in records])
    ok = all(r.ok for r in records) and bool(np.all(np.diff(eps) < 0)) and fit is not None and fit.beta > 0
    if fit is not None:
        ok &= all(r.d_H / setup.domain.r0 <= fit.eta(r.epsilon, envelope=True) * 1.05 for r in records)
    summary = [f"{len(records)} records, eps strictly decreasing: {bool(np.all(np.diff(eps) < 0))}"]
    if fit is not None:
        summary.append(f"beta={fit.beta:.4g} C={fit.C:.4g} C_envelope={fit.C_envelope:.4g} r2={fit.r_squared:.4f}")
    return ok, summary


def run_reconstruct(cfg, setup, out):
    e = cfg.experiment
    r0 = setup.domain.r0
    initial = setup.domain.profile
    target = initial.perturbed(bump_mode(initial.width, 2 * r0), e.target_amplitude)
    rc = ReconstructionConfig(h=cfg.solver.h, steps=cfg.steps, n_modes=e.n_modes, weight=e.weight, max_iter=e.max_iter)
    meas = synthetic_measurements(setup, target, rc.h, rc.steps, noise=e.noise, rng=np.random.default_rng(e.seed))
    result = reconstruct_boundary(meas, setup, initial, rc)
    before, after = reconstruction_gain(setup, initial, result.profile, target)
    build_domain(result.profile, setup.domain.W, setup.domain.H, (r0, setup.domain.L, setup.domain.M))
    write_profile(os.path.join(out, "recovered_profile.txt"), result.profile, setup.domain.M, setup.domain.H)
    with open(os.path.join(out, "reconstruction.csv"), "w") as fh:
        fh.write("iteration,objective\n")
        for k, J in enumerate(result.history):
            fh.write(f"{k},{J:.12g}\n")
        fh.write(f"# d_H_initial={before:.12g},d_H_recovered={after:.12g},stalled={int(result.stalled)}\n")
    ok = after <= 0.5 * before
    return ok, [f"d_H initial {before:.4g} -> recovered {after:.4g} ({result.message})"]


RUNNERS = {
    "validate": run_validate,
    "solve": run_solve,
    "sweep": run_sweep,
    "inequalities": run_inequalities,
    "reconstruct": run_reconstruct,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.mode:
            overrides["mode"] = args.mode
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigParseError("--workers must be positive", field="workers")
            overrides["workers"] = args.workers
        cfg = cfg.with_overrides(**overrides)
    except ConfigParseError as exc:
        where = f" (line {exc.line})" if exc.line else ""
        print(f"configuration error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    mode = cfg.experiment.mode
    out = fresh_run_dir(args.out or cfg.experiment.output, mode)
    start = time.perf_counter()
    try:
        setup = cfg.problem()
        ok, summary = RUNNERS[mode](cfg, setup, out)
    except AssumptionViolated as exc:
        ok, summary = False, [f"assumption ({exc.assumption}) violated: {exc}"]
    except CorrolabError as exc:
        ok, summary = False, [f"{type(exc).__name__}: {exc}"]
    status = EXIT_OK if ok else EXIT_FAIL
    with open(os.path.join(out, "manifest.ini"), "w") as fh:
        fh.write(f"# corrolab run: mode={mode} status={status} runtime={time.perf_counter() - start:.2f}s\n")
        fh.write(f"# config={os.path.abspath(args.config)}\n")
        fh.write(cfg.to_ini())
    for line in summary:
        print(line)
    print(f"{'PASS' if ok else 'FAIL'} mode={mode} output={out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
