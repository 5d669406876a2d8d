"""Admissible domains with a graph-shaped unknown boundary, and the
distances used to compare two of them.

A domain is the rectangle ``(0, W) x (phi(x1), H)`` whose bottom side is the
graph of a cubic profile ``phi``.  The bottom side is the inaccessible
boundary ``I``; the top side and the two lateral sides form the accessible
boundary ``A``.  The measurement arc ``Sigma`` is a segment of the top side.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .errors import (
    AreaBoundViolated,
    IncompatibleDomains,
    ProfileTooRough,
    SigmaBallViolated,
)

DIM = 2


@dataclass(frozen=True, eq=False)
class BoundaryProfile:
    """Cubic interpolant of the bottom boundary ``x2 = phi(x1)``."""

    knots: np.ndarray
    values: np.ndarray
    r0: float
    L: float

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or knots.size < 4:
            raise ValueError("profile needs matching 1-D knots/values with at least 4 entries")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("profile knots must be strictly increasing")
        knots.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_spline", CubicSpline(knots, values))

    @classmethod
    def from_function(cls, func, W, r0, L, n_knots=201):
        x = np.linspace(0.0, W, n_knots)
        return cls(x, np.asarray(func(x), dtype=float) * np.ones_like(x), r0, L)

    @classmethod
    def flat(cls, W, r0, L, level=0.0, n_knots=11):
        return cls.from_function(lambda x: np.full_like(x, level), W, r0, L, n_knots)

    def __call__(self, x):
        return self._spline(x)

    def derivative(self, x, order=1):
        return self._spline(x, order)

    def integral(self):
        return float(self._spline.integrate(self.knots[0], self.knots[-1]))

    def shifted(self, delta):
        return BoundaryProfile(self.knots, self.values + delta, self.r0, self.L)

    def perturbed(self, mode, amplitude):
        """Profile ``phi + amplitude * mode`` sampled on the same knots."""
        return BoundaryProfile(self.knots, self.values + amplitude * mode(self.knots), self.r0, self.L)

    @property
    def width(self):
        return float(self.knots[-1] - self.knots[0])

    def roughness(self, spacing=None):
        """Divided-difference estimates ``(max |phi'|, max |phi''|)``.

        The grid spacing defaults to ``r0 / 50``.
        """
        spacing = self.r0 / 50.0 if spacing is None else spacing
        n = max(int(np.ceil(self.width / spacing)), 2)
        x = np.linspace(self.knots[0], self.knots[-1], n + 1)
        y = self(x)
        dx = x[1] - x[0]
        slope = np.abs(np.diff(y)) / dx
        curvature = np.abs(np.diff(y, 2)) / dx**2
        return float(slope.max()), float(curvature.max())

    def arc_length(self, n=20000):
        x = np.linspace(self.knots[0], self.knots[-1], n + 1)
        ds = np.sqrt(1.0 + self.derivative(x) ** 2)
        return float(np.trapezoid(ds, x))


@dataclass(frozen=True, eq=False)
class DomainSpec:
    W: float
    H: float
    profile: BoundaryProfile
    sigma: tuple
    P0: float
    r0: float
    L: float
    M: float
    area: float
    origin: tuple = (0.0, 0.0)

    def phi(self, x1):
        """Bottom boundary height at absolute abscissa ``x1``."""
        return self.profile(np.asarray(x1, dtype=float) - self.origin[0]) + self.origin[1]

    @property
    def top(self):
        return self.origin[1] + self.H

    @property
    def x_range(self):
        return self.origin[0], self.origin[0] + self.W

    @property
    def sigma_abs(self):
        return self.sigma[0] + self.origin[0], self.sigma[1] + self.origin[0]

    @property
    def sigma_length(self):
        return self.sigma[1] - self.sigma[0]

    def translated(self, shift):
        return replace(self, origin=(self.origin[0] + shift[0], self.origin[1] + shift[1]))

    def with_profile(self, profile):
        return build_domain(profile, self.W, self.H, (self.r0, self.L, self.M), sigma=self.sigma)

    def contains(self, pts, tol=1e-12):
        pts = np.atleast_2d(pts)
        x0, x1 = self.x_range
        inside_x = (pts[:, 0] >= x0 - tol) & (pts[:, 0] <= x1 + tol)
        xc = np.clip(pts[:, 0], x0, x1)
        return inside_x & (pts[:, 1] >= self.phi(xc) - tol) & (pts[:, 1] <= self.top + tol)

    def boundary_polyline(self, resolution):
        """Closed counter-clockwise polyline through ``dOmega``.

        Vertices are spaced at most ``resolution`` apart; the first vertex is
        the bottom-left corner and is not repeated at the end.
        """
        x0, x1 = self.x_range
        nb = max(int(np.ceil(self.W / resolution)), 1)
        xb = np.linspace(x0, x1, nb + 1)
        bottom = np.column_stack([xb, self.phi(xb)])

        def vertical(x, y_from, y_to):
            n = max(int(np.ceil(abs(y_to - y_from) / resolution)), 1)
            y = np.linspace(y_from, y_to, n + 1)[1:]
            return np.column_stack([np.full_like(y, x), y])

        right = vertical(x1, bottom[-1, 1], self.top)
        top = np.column_stack([xb[::-1], np.full(nb + 1, self.top)])[1:]
        left = vertical(x0, self.top, bottom[0, 1])[:-1]
        return np.vstack([bottom, right, top, left])

    def accessible_polyline(self, resolution):
        """Open polyline for ``A``: left side upwards, top, right side downwards."""
        poly = self.boundary_polyline(resolution)
        nb = max(int(np.ceil(self.W / resolution)), 1)
        # rotate so the polyline starts at the bottom-right corner and drop the bottom
        return np.vstack([poly[nb:], poly[:1]])[::-1]

    def distance_to_inaccessible(self, pts, resolution=None):
        resolution = self.r0 / 200.0 if resolution is None else resolution
        x0, x1 = self.x_range
        nb = max(int(np.ceil(self.W / resolution)), 1)
        xb = np.linspace(x0, x1, nb + 1)
        return _PolylineDistance(np.column_stack([xb, self.phi(xb)]), closed=False)(pts)

    def distance_to_accessible(self, pts, resolution=None):
        resolution = self.r0 / 200.0 if resolution is None else resolution
        return _PolylineDistance(self.accessible_polyline(resolution), closed=False)(pts)

    def distance_to_boundary(self, pts, resolution=None):
        resolution = self.r0 / 200.0 if resolution is None else resolution
        return _PolylineDistance(self.boundary_polyline(resolution), closed=True)(pts)


@dataclass(frozen=True)
class DistanceReport:
    d_H: float
    d_m: float
    d_boundary: float
    sampling_resolution: float

    COLUMNS = ("d_H", "d_m", "d_boundary", "sampling_resolution")

    def csv_row(self):
        return ",".join(f"{getattr(self, c):.12g}" for c in self.COLUMNS)


def build_domain(profile, W, H, constants, sigma=None, P0=None, check_area=True):
    """Validate the a-priori assumptions and return a :class:`DomainSpec`.

    ``constants`` is ``(r0, L, M)``.  ``sigma`` is the measurement segment of
    the top side as ``(a, b)``; by default it is centred and kept at least
    ``2 r0`` from the corners.
    """
    r0, L, M = (float(c) for c in constants)
    if min(r0, L, M, W, H) <= 0:
        raise ValueError("W, H, r0, L and M must be positive")
    if abs(profile.knots[0]) > 1e-12 or abs(profile.knots[-1] - W) > 1e-12:
        raise ValueError(f"profile knots must span [0, {W}]")

    _, curvature = profile.roughness(r0 / 50.0)
    if curvature * r0 > L:
        raise ProfileTooRough(
            f"(2c) C^{{1,1}} bound exceeded: r0*max|phi''| = {curvature * r0:.4g} > L = {L:.4g}",
            assumption="2c",
        )
    xs = np.linspace(0.0, W, max(int(np.ceil(W / (r0 / 50.0))), 2) + 1)
    phi_max = float(np.max(profile(xs)))
    if not H > phi_max + r0:
        raise ProfileTooRough(
            f"(2b) inaccessible boundary comes within r0 of the top: max phi = {phi_max:.4g}, H = {H:.4g}",
            assumption="2b",
        )

    area = W * H - profile.integral()
    if check_area and area > M * r0**DIM:
        raise AreaBoundViolated(
            f"(2a) |Omega| = {area:.6g} exceeds M r0^2 = {M * r0**DIM:.6g}", assumption="2a"
        )

    if sigma is None:
        sigma = (max(2 * r0, W / 2 - 2 * r0), min(W - 2 * r0, W / 2 + 2 * r0))
    a, b = float(sigma[0]), float(sigma[1])
    P0 = 0.5 * (a + b) if P0 is None else float(P0)
    if not (0.0 < a < b < W):
        raise SigmaBallViolated(f"(2d) Sigma = [{a}, {b}] is not inside the top side", assumption="2d")
    if P0 - r0 < a - 1e-12 or P0 + r0 > b + 1e-12:
        raise SigmaBallViolated(
            f"(2d) boundary ball of radius r0 about P0 = {P0} leaves Sigma = [{a}, {b}]",
            assumption="2d",
        )
    if P0 - r0 <= 0 or P0 + r0 >= W:
        raise SigmaBallViolated("(2d) ball about P0 reaches a lateral side", assumption="2d")
    return DomainSpec(W=float(W), H=float(H), profile=profile, sigma=(a, b), P0=P0,
                      r0=r0, L=L, M=M, area=float(area))


def assumption_report(domain):
    """Per-assumption status lines for a validated domain."""
    slope, curvature = domain.profile.roughness()
    return [
        ("2a", True, f"|Omega| = {domain.area:.6g} <= M r0^2 = {domain.M * domain.r0**DIM:.6g}"),
        ("2b", True, "dOmega = closure(A) u closure(I); A = top and lateral sides, I = graph of phi"),
        ("2c", True, f"r0 max|phi''| = {curvature * domain.r0:.4g} <= L = {domain.L:.4g}; max|phi'| = {slope:.4g}"),
        ("2d", True, f"B_r0(P0) n dOmega inside Sigma = [{domain.sigma[0]:.4g}, {domain.sigma[1]:.4g}]"),
    ]


class _PolylineDistance:
    """Euclidean distance from points to a polyline.

    Candidate segments are those adjacent to the ``k`` nearest vertices, which
    is exact whenever the polyline is sampled finely relative to its
    curvature.
    """

    def __init__(self, vertices, closed, k=4):
        self.vertices = np.asarray(vertices, dtype=float)
        self.closed = closed
        self.k = min(k, len(self.vertices))
        self.tree = cKDTree(self.vertices)

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if len(pts) == 0:
            return np.zeros(0)
        n = len(self.vertices)
        dist_v, idx = self.tree.query(pts, k=self.k)
        dist_v = np.atleast_2d(dist_v.T).T if self.k == 1 else dist_v
        idx = idx.reshape(len(pts), -1)
        best = np.min(dist_v.reshape(len(pts), -1), axis=1)
        for step in (-1, 1):
            other = idx + step
            if self.closed:
                other %= n
                valid = np.ones_like(other, dtype=bool)
            else:
                valid = (other >= 0) & (other < n)
                other = np.clip(other, 0, n - 1)
            d = _segment_distance(pts[:, None, :], self.vertices[idx], self.vertices[other])
            d = np.where(valid, d, np.inf)
            best = np.minimum(best, d.min(axis=1))
        return best


def _segment_distance(p, a, b):
    ab = b - a
    denom = np.einsum("...i,...i->...", ab, ab)
    s = np.einsum("...i,...i->...", p - a, ab) / np.where(denom > 0, denom, 1.0)
    s = np.clip(s, 0.0, 1.0)
    proj = a + s[..., None] * ab
    return np.linalg.norm(p - proj, axis=-1)


def _check_compatible(d1, d2):
    same = (
        abs(d1.W - d2.W) <= 1e-12
        and abs(d1.H - d2.H) <= 1e-12
        and np.allclose(d1.origin, d2.origin, atol=1e-12, rtol=0)
    )
    if not same:
        raise IncompatibleDomains("domains must share W, H and placement of the accessible boundary")


def _bottom_abscissae(domain, resolution):
    x0, x1 = domain.x_range
    return np.linspace(x0, x1, max(int(np.ceil(domain.W / resolution)), 1) + 1)


def _points_outside(d1, d2, resolution):
    """Samples of the closure of ``d1`` that lie outside the closure of ``d2``.

    Points of ``d1`` above both graphs are inside ``d2`` and contribute nothing
    to any one-sided distance, so only the strip between the two bottom graphs
    is sampled besides the boundary of ``d1``.
    """
    xb = _bottom_abscissae(d1, resolution)
    lo, hi = d1.phi(xb), d2.phi(xb)
    gap = hi - lo
    cols = np.nonzero(gap > 0)[0]
    strips = []
    for i in cols:
        n = int(np.ceil(gap[i] / resolution))
        y = lo[i] + gap[i] * np.arange(n) / n
        strips.append(np.column_stack([np.full(n, xb[i]), y]))
    interior = np.vstack(strips) if strips else np.zeros((0, 2))
    return interior[~d2.contains(interior)]


def _one_sided(samples, target, resolution):
    outside = samples[~target.contains(samples)]
    if len(outside) == 0:
        return 0.0
    return float(np.max(target.distance_to_boundary(outside, resolution / 4)))


def modified_distance(d1, d2, resolution=None):
    """``max(sup_{dOmega1} dist(., closure Omega2), sup_{dOmega2} dist(., closure Omega1))``."""
    _check_compatible(d1, d2)
    resolution = d1.r0 / 200.0 if resolution is None else resolution
    return max(
        _one_sided(d1.boundary_polyline(resolution), d2, resolution),
        _one_sided(d2.boundary_polyline(resolution), d1, resolution),
    )


def hausdorff_distance(d1, d2, resolution=None):
    """Hausdorff distance between the closures, by dense point sampling.

    The closure samples contain the boundary samples used by
    :func:`modified_distance`, so ``d_m <= d_H`` holds exactly for the
    sampled values.
    """
    _check_compatible(d1, d2)
    resolution = d1.r0 / 200.0 if resolution is None else resolution

    def side(a, b):
        samples = np.vstack([a.boundary_polyline(resolution), _points_outside(a, b, resolution)])
        return _one_sided(samples, b, resolution)

    return max(side(d1, d2), side(d2, d1))


def boundary_hausdorff(d1, d2, resolution=None):
    """Hausdorff distance between ``dOmega1`` and ``dOmega2``."""
    _check_compatible(d1, d2)
    resolution = d1.r0 / 200.0 if resolution is None else resolution
    b1 = d1.boundary_polyline(resolution)
    b2 = d2.boundary_polyline(resolution)
    return max(
        float(np.max(d2.distance_to_boundary(b1, resolution / 4))),
        float(np.max(d1.distance_to_boundary(b2, resolution / 4))),
    )


def distance_report(d1, d2, resolution=None):
    resolution = d1.r0 / 200.0 if resolution is None else resolution
    return DistanceReport(
        d_H=hausdorff_distance(d1, d2, resolution),
        d_m=modified_distance(d1, d2, resolution),
        d_boundary=boundary_hausdorff(d1, d2, resolution),
        sampling_resolution=resolution,
    )


def random_profile(W, r0, L, rng, n_modes=4, max_amplitude=None, margin=None):
    """Smooth random profile that vanishes, with its slope, near both ends.

    Mode amplitudes are scaled so the curvature bound holds with a factor-2
    safety margin.
    """
    max_amplitude = r0 / 4 if max_amplitude is None else max_amplitude
    margin = 2 * r0 if margin is None else margin
    x = np.linspace(0.0, W, 401)
    y = np.zeros_like(x)
    for k in range(1, n_modes + 1):
        y += rng.normal() / k**2 * bump_mode(W, margin, k)(x)
    peak = np.max(np.abs(y))
    if peak > 0:
        y *= rng.uniform(0.2, 1.0) * max_amplitude / peak
    profile = BoundaryProfile(x, y, r0, L)
    _, curvature = profile.roughness()
    if curvature * r0 > L / 2:
        profile = BoundaryProfile(x, y * (L / 2) / (curvature * r0), r0, L)
    return profile


def bump_mode(W, margin, k=1):
    """Unit-peak mode supported in ``[margin, W - margin]`` with C^1 ends.

    ``k = 1`` is the single bump ``sin^2``; higher ``k`` add oscillation.
    """
    span = W - 2 * margin

    def mode(x):
        s = np.clip((np.asarray(x, dtype=float) - margin) / span, 0.0, 1.0)
        envelope = np.sin(np.pi * s) ** 2
        return envelope if k == 1 else envelope * np.cos((k - 1) * np.pi * s)

    return mode


def distance_ratio_sweep(base, rng, n_pairs=100, d0=None, resolution=None):
    """Largest ``d_H / d_m`` over random valid pairs with ``d_H <= d0``.

    Returns ``(max_ratio, n_used)``.
    """
    d0 = base.r0 / 4 if d0 is None else d0
    resolution = base.r0 / 100 if resolution is None else resolution
    worst, used = 0.0, 0
    for _ in range(n_pairs):
        p1 = random_profile(base.W, base.r0, base.L, rng, max_amplitude=d0 / 2)
        p2 = random_profile(base.W, base.r0, base.L, rng, max_amplitude=d0 / 2)
        a, b = base.with_profile(p1), base.with_profile(p2)
        dh = hausdorff_distance(a, b, resolution)
        dm = modified_distance(a, b, resolution)
        if 0 < dh <= d0 and dm > 0:
            worst = max(worst, dh / dm)
            used += 1
    return worst, used
