"""Refinement study of the forward solver on the flat unit square.

Prints L2 errors and observed orders for a manufactured cosine solution:
Crank-Nicolson with dt = h for the spatial order, backward Euler on a fixed
fine mesh for the temporal order.
"""
import argparse

import numpy as np

from corrolab import assembly
from corrolab.boundary_data import ConstantField, FluxSpec, ImpedanceSpec
from corrolab.geometry import BoundaryProfile, build_domain
from corrolab.mesh import generate_mesh
from corrolab.solver import SolverConfig, TimeGrid, VerificationSource, solve_forward

GAMMA = 5.0


def cosine_problem(a, da):
    k = np.pi

    def exact(p, t):
        return a(t) * np.cos(k * p[:, 0])

    def source(p, t):
        return (da(t) + k * k * a(t)) * np.cos(k * p[:, 0])

    return exact, VerificationSource(source, lambda p, t: GAMMA * exact(p, t))


def report(label, sizes, errs):
    errs = np.array(errs)
    orders = np.log2(errs[:-1] / errs[1:])
    print(label)
    for n, e, o in zip(sizes, errs, [np.nan, *orders]):
        print(f"  n={n:4d}  error={e:.4e}  order={o:.3f}")


def main():
    p = argparse.ArgumentParser(description="manufactured-solution refinement study")
    p.add_argument("--levels", type=int, default=4)
    args = p.parse_args()
    sizes = [10 * 2**i for i in range(args.levels)]
    domain = build_domain(BoundaryProfile.flat(1.0, 0.1, 1.0), 1.0, 1.0, (0.1, 1.0, 120.0))
    gamma = ImpedanceSpec.constant(GAMMA)
    zero = FluxSpec(ConstantField(0.0), 1.0, 0.25, 1.0, 0.0, 0.1, "zero")

    exact, V = cosine_problem(lambda t: t, lambda t: 1.0)
    errs = []
    for n in sizes:
        mesh = generate_mesh(domain, 1.0 / n, enforce_resolution=False)
        u = solve_forward(mesh, gamma, zero, TimeGrid(1.0, n), SolverConfig(theta=0.5, verification=V))
        errs.append(assembly.l2_error(mesh, u.values[-1], lambda q: exact(q, 1.0)))
    report("space (theta = 1/2, dt = h, u = t cos(pi x))", sizes, errs)

    w = 2 * np.pi
    exact, V = cosine_problem(lambda t: np.sin(w * t), lambda t: w * np.cos(w * t))
    mesh = generate_mesh(domain, 0.1 / 16)
    errs = []
    for n in sizes:
        u = solve_forward(mesh, gamma, zero, TimeGrid(1.0, n), SolverConfig(theta=1.0, verification=V))
        errs.append(assembly.l2_error(mesh, u.values[-1], lambda q: exact(q, 1.0)))
    report("time (theta = 1, h = r0/16, u = sin(2 pi t) cos(pi x))", sizes, errs)


if __name__ == "__main__":
    main()
