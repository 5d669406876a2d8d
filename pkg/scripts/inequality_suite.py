"""Run every inequality check on the default flux pair at several mesh levels."""
import argparse

from corrolab.cli import inequality_suite
from corrolab.experiments import default_setup
from corrolab.mesh import generate_mesh
from corrolab.solver import TimeGrid, solve_forward
from corrolab.textio import write_reports


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--levels", type=int, nargs="+", default=[4, 8, 16], help="mesh sizes h = r0 / k")
    p.add_argument("--out", default=None, help="write the finest level's reports to this CSV")
    args = p.parse_args()
    setup = default_setup()
    r0 = setup.domain.r0
    reports = []
    for k in args.levels:
        h = r0 / k
        mesh = generate_mesh(setup.domain, h)
        grid = TimeGrid(setup.T, int(round(setup.T / h)))
        u = solve_forward(mesh, setup.gamma, setup.g, grid)
        ut = solve_forward(mesh, setup.gamma, setup.gt, grid)
        reports = inequality_suite(u, ut)
        print(f"h = r0/{k}")
        for r in reports:
            print(f"  {r.name:26s} C={r.constant:.5g} theta={r.exponent:.4g} {'pass' if r.passed else 'FAIL'}")
    if args.out:
        write_reports(args.out, reports)


if __name__ == "__main__":
    main()
