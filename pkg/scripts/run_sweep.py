"""Boundary-perturbation sweep with a log-rate fit, written as CSV.

    python scripts/run_sweep.py --out sweep.csv --levels 8 --workers 2
"""
import argparse

from corrolab.boundary_data import ImpedanceSpec, SmoothImpedance
from corrolab.experiments import (
    PerturbationFamily,
    SweepConfig,
    default_setup,
    fit_log_rate,
    run_stability_sweep,
    write_sweep_csv,
)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--r0", type=float, default=0.1)
    p.add_argument("--k", type=int, default=8, help="mesh size h = r0 / k")
    p.add_argument("--steps", type=int, default=80)
    p.add_argument("--start", type=float, default=None, help="largest amplitude (default 0.08 r0)")
    p.add_argument("--levels", type=int, default=8, help="number of halving amplitudes")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()

    r0 = args.r0
    gamma = ImpedanceSpec(SmoothImpedance(0.3, 0.2, r0, 1.0, slope=1.0), 10.0, False, "smooth")
    setup = default_setup(r0=r0, gamma=gamma)
    start = 0.08 * r0 if args.start is None else args.start
    family = PerturbationFamily.halving(setup.domain.profile, start, args.levels)
    records = run_stability_sweep(setup, family, SweepConfig(h=r0 / args.k, steps=args.steps, workers=args.workers))
    fit = fit_log_rate(records, r0)
    write_sweep_csv(args.out, records, fit)
    for r in records:
        print(f"delta={r.delta:.3e} eps={r.epsilon:.4e} d_H={r.d_H:.4e} gamma gap={r.impedance_gap:.3e}")
    print(f"beta={fit.beta:.4g} C={fit.C:.4g} C_envelope={fit.C_envelope:.4g} r2={fit.r_squared:.4f}")


if __name__ == "__main__":
    main()
