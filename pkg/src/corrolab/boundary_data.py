"""Heat fluxes on the accessible boundary and impedances on the unknown one.

Flux and impedance values are callables ``f(points, t)`` taking an ``(N, 2)``
array of positions.  They are plain picklable classes so that sweeps can
ship them to worker processes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    EarlyTimeMismatch,
    FluxesProportional,
    ImpedanceOutOfBounds,
    LowerBoundViolated,
    SupportViolated,
)

# Phi0 below this is treated as zero: the two measurements carry the same information.
PHI0_THRESHOLD = 1e-8


def _ramp(s):
    return np.clip(s, 0.0, 1.0)


class PlateauFlux:
    """Flux ``level * w(x) * (1 + growth * t / T)``.

    ``w`` is 1 where the distance to the reference bottom graph exceeds
    ``2 r0 - margin`` and 0 below ``r0 + margin``, linear in between; the
    margin keeps both conditions valid for every domain whose bottom graph
    stays within ``margin`` of the reference.
    """

    def __init__(self, level, r0, reference, W, margin=None, growth=0.0, T=1.0, resolution=None):
        self.level = float(level)
        self.r0 = float(r0)
        self.margin = 0.25 * r0 if margin is None else float(margin)
        self.growth = float(growth)
        self.T = float(T)
        resolution = r0 / 100 if resolution is None else resolution
        n = max(int(np.ceil(W / resolution)), 2)
        x = np.linspace(0.0, W, n + 1)
        self._graph = np.column_stack([x, reference(x)])
        self._tree = None

    def _dist(self, pts):
        from scipy.spatial import cKDTree

        if self._tree is None:
            self._tree = cKDTree(self._graph)
        d, _ = self._tree.query(pts)
        return d

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_tree"] = None
        return state

    def weight(self, pts):
        lo = self.r0 + self.margin
        hi = 2 * self.r0 - self.margin
        return _ramp((self._dist(pts) - lo) / (hi - lo))

    def __call__(self, pts, t):
        return self.level * self.weight(pts) * (1.0 + self.growth * t / self.T)


class ModulatedFlux:
    """``base * (1 + contrast * shape(x) * ramp(t))`` with ``ramp = 0`` up to ``t1``.

    ``shape`` is ``"time"`` (uniform in space) or ``"space"`` (linear
    variation ``x1 / W`` along the accessible boundary).
    """

    def __init__(self, base, contrast, t1, T, shape="space", W=1.0):
        self.base = base
        self.contrast = float(contrast)
        self.t1 = float(t1)
        self.T = float(T)
        self.shape = shape
        self.W = float(W)

    def modulation(self, pts, t):
        r = _ramp((t - self.t1) / (self.T - self.t1))
        if self.shape == "time":
            s = np.ones(len(pts))
        elif self.shape == "space":
            s = np.asarray(pts)[:, 0] / self.W
        else:
            raise ValueError(f"unknown modulation shape {self.shape!r}")
        return 1.0 + self.contrast * s * r

    def __call__(self, pts, t):
        return self.base(pts, t) * self.modulation(pts, t)


class SmoothOnset:
    """``base * sin^2(pi t / (2 duration))`` until ``duration``, then ``base``.

    Starting from zero keeps the flux compatible with zero initial data,
    which the theta = 1/2 scheme needs for its full order.
    """

    def __init__(self, base, duration):
        self.base = base
        self.duration = float(duration)

    def __call__(self, pts, t):
        s = np.sin(0.5 * np.pi * min(t / self.duration, 1.0)) ** 2
        return s * self.base(pts, t)


class ScaledFlux:
    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)

    def __call__(self, pts, t):
        return self.factor * self.base(pts, t)


@dataclass(frozen=True, eq=False)
class FluxSpec:
    g: Callable
    T: float
    t1: float
    E: float
    Phi1: float
    r0: float
    name: str = "g"

    def __call__(self, pts, t):
        return self.g(pts, t)

    def scaled(self, factor):
        return FluxSpec(ScaledFlux(self.g, factor), self.T, self.t1, self.E * abs(factor),
                        self.Phi1 * factor, self.r0, f"{factor}*{self.name}")


def zero_flux(T, t1, r0):
    return FluxSpec(ConstantField(0.0), T, t1, 1.0, 0.0, r0, "zero")


class ConstantField:
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, pts, t):
        return np.full(len(pts), self.value)


class SmoothImpedance:
    """``(base + amplitude * sin(pi * x1 / W) + slope * (x2 - y_ref)) / r0``, clipped at 0."""

    def __init__(self, base, amplitude, r0, W=1.0, slope=0.0, y_ref=0.0):
        self.base = float(base)
        self.amplitude = float(amplitude)
        self.r0 = float(r0)
        self.W = float(W)
        self.slope = float(slope)
        self.y_ref = float(y_ref)

    def __call__(self, pts, t):
        pts = np.asarray(pts)
        v = self.base + self.amplitude * np.sin(np.pi * pts[:, 0] / self.W) + self.slope * (pts[:, 1] - self.y_ref)
        return np.maximum(v, 0.0) / self.r0


@dataclass(frozen=True, eq=False)
class ImpedanceSpec:
    gamma: Callable
    gamma_bar: float
    time_dependent: bool = False
    name: str = "gamma"

    def __call__(self, pts, t):
        return self.gamma(pts, t)

    @classmethod
    def constant(cls, value, gamma_bar=None):
        return cls(ConstantField(value), value if gamma_bar is None else gamma_bar, False, f"gamma={value:g}")


@dataclass(frozen=True)
class FluxValidation:
    E: float
    Phi0: float
    Phi1: float
    t1: float
    Phi0_window: float
    checks: tuple

    def lines(self):
        return [f"({label}) {'pass' if ok else 'FAIL'}: {text}" for label, ok, text in self.checks]


def accessible_samples(domain, resolution=None):
    """Sample points along A with arc-length weights."""
    resolution = domain.r0 / 50 if resolution is None else resolution
    poly = domain.accessible_polyline(resolution)
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    w = np.zeros(len(poly))
    w[:-1] += seg / 2
    w[1:] += seg / 2
    return poly, w


def lipschitz_norm(flux, pts, times, r0):
    """Sampled ``sup|g| + r0 * Lip(g)`` along the sample path and in time.

    Space and time increments are combined with the parabolic metric of the
    ``C^{0,1}`` seminorm, ``(|dx|^2 + |dt|)^{1/2}``.
    """
    vals = np.array([flux(pts, t) for t in times])
    sup = float(np.max(np.abs(vals)))
    dx = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    dt = np.diff(times)
    lip_x = np.max(np.abs(np.diff(vals, axis=1)) / np.where(dx > 0, dx, np.inf)[None, :])
    lip_t = np.max(np.abs(np.diff(vals, axis=0)) / np.sqrt(dt)[:, None]) if len(times) > 1 else 0.0
    return sup + r0 * float(max(lip_x, lip_t))


def ratio_deviation(g, gt, domain, t_start, T, resolution=None, n_times=401, breakpoints=()):
    """``|| gt/g - mean(gt/g) ||_{L2}`` over ``supp g x [t_start, T]``.

    Time integrals use a 3-point Gauss rule on each interval of a uniform
    grid refined by ``breakpoints``; ratios that are piecewise linear in time
    with kinks at breakpoints are integrated exactly.
    """
    pts, w = accessible_samples(domain, resolution)
    knots = np.linspace(t_start, T, n_times)
    extra = [b for b in breakpoints if t_start < b < T]
    knots = np.unique(np.concatenate([knots, extra]))
    gx, gw = np.polynomial.legendre.leggauss(3)
    left, width = knots[:-1], np.diff(knots)
    times = (left[:, None] + 0.5 * (gx[None, :] + 1.0) * width[:, None]).ravel()
    tw = (0.5 * gw[None, :] * width[:, None]).ravel()
    gv = np.array([g(pts, t) for t in times])
    gtv = np.array([gt(pts, t) for t in times])
    support = gv > 0
    ratio = np.where(support, gtv / np.where(support, gv, 1.0), 0.0)
    W = tw[:, None] * w[None, :] * support
    mass = W.sum()
    if mass == 0:
        return 0.0
    mean = (W * ratio).sum() / mass
    return float(np.sqrt((W * (ratio - mean) ** 2).sum()))


def validate_flux_pair(g, gt, domain, n_times=101, resolution=None):
    """Certify the flux assumptions for a pair on a sample grid of ``A x [0, T]``.

    Raises on the first violated condition; otherwise returns the measured
    constants together with one status line per assumption.
    """
    if abs(g.T - gt.T) > 1e-12 or abs(g.t1 - gt.t1) > 1e-12:
        raise ValueError("flux pair must share T and t1")
    r0, T, t1 = domain.r0, g.T, g.t1
    pts, _ = accessible_samples(domain, resolution)
    times = np.linspace(0.0, T, n_times)
    dist_I = domain.distance_to_inaccessible(pts)
    checks = []

    E_meas = max(lipschitz_norm(g, pts, times, r0), lipschitz_norm(gt, pts, times, r0))
    checks.append(("3a", True, f"Lipschitz on sample grid, sampled C^0,1 norm {E_meas:.4g}"))

    for f in (g, gt):
        vals = np.array([f(pts, t) for t in times])
        outside = dist_I <= r0
        if np.any(np.abs(vals[:, outside]) > 0):
            raise SupportViolated(f"(3b) flux {f.name} is nonzero within r0 of I", assumption="3b")
    checks.append(("3b", True, "supports inside A^r0 x [0,T]"))

    far = dist_I > 2 * r0
    if not np.any(far):
        raise SupportViolated("(3c) A^{2r0} is empty", assumption="3c")
    checks.append(("3c", True, f"A^2r0 sampled by {int(far.sum())} points"))

    if E_meas > max(g.E, gt.E) * (1 + 1e-9):
        raise SupportViolated(f"(3d) C^0,1 norm {E_meas:.4g} exceeds E = {max(g.E, gt.E):.4g}", assumption="3d")
    checks.append(("3d", True, f"{E_meas:.4g} <= E = {max(g.E, gt.E):.4g}"))

    early = times[times <= t1 + 1e-12]
    for t in early:
        if not np.array_equal(g(pts, t), gt(pts, t)):
            raise EarlyTimeMismatch(f"(3e) fluxes differ at t = {t:.4g} <= t1 = {t1:.4g}", assumption="3e")
    checks.append(("3e", True, f"g = g~ on [0, {t1:g}]"))

    Phi0 = ratio_deviation(g, gt, domain, 0.0, T, resolution, breakpoints=(t1,))
    Phi0_window = ratio_deviation(g, gt, domain, t1, T, resolution)
    if Phi0 < PHI0_THRESHOLD:
        raise FluxesProportional(f"(3f) Phi0 = {Phi0:.3g}: fluxes are proportional", assumption="3f")
    checks.append(("3f", True, f"Phi0 = {Phi0:.6g} (on [t1,T]: {Phi0_window:.6g})"))

    floor = g.Phi1 / r0
    for f in (g, gt):
        vals = np.array([f(pts[far], t) for t in times])
        if np.min(vals) < floor * (1 - 1e-12):
            raise LowerBoundViolated(
                f"(3g) flux {f.name} drops to {np.min(vals):.4g} < Phi1/r0 = {floor:.4g} on A^2r0",
                assumption="3g",
            )
    checks.append(("3g", True, f"g, g~ >= Phi1/r0 = {floor:.4g} on A^2r0"))
    return FluxValidation(E=E_meas, Phi0=Phi0, Phi1=g.Phi1, t1=t1, Phi0_window=Phi0_window, checks=tuple(checks))


def validate_impedance(gamma, domain, T, n_times=21, resolution=None):
    """Check ``0 <= gamma <= gamma_bar`` on I and report a sampled Lipschitz constant."""
    resolution = domain.r0 / 50 if resolution is None else resolution
    x0, x1 = domain.x_range
    xs = np.linspace(x0, x1, max(int(np.ceil(domain.W / resolution)), 2) + 1)
    pts = np.column_stack([xs, domain.phi(xs)])
    times = np.linspace(0.0, T, n_times)
    vals = np.array([gamma(pts, t) for t in times])
    if np.min(vals) < 0 or np.max(vals) > gamma.gamma_bar * (1 + 1e-12):
        raise ImpedanceOutOfBounds(
            f"(4b) gamma ranges over [{np.min(vals):.4g}, {np.max(vals):.4g}], outside [0, {gamma.gamma_bar:.4g}]",
            assumption="4b",
        )
    lip = lipschitz_norm(gamma, pts, times, domain.r0)
    return [
        ("4a", True, f"sampled C^0,1 norm {lip:.4g}"),
        ("4b", True, f"0 <= gamma <= gamma_bar = {gamma.gamma_bar:.4g}"),
    ]
