import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrolab.errors import AreaBoundViolated, IncompatibleDomains, ProfileTooRough, SigmaBallViolated
from corrolab.geometry import (
    BoundaryProfile,
    assumption_report,
    boundary_hausdorff,
    build_domain,
    bump_mode,
    distance_ratio_sweep,
    distance_report,
    hausdorff_distance,
    modified_distance,
    random_profile,
)

R0 = 0.1
CONST = (R0, 1.0, 120.0)
RES = R0 / 10

# Point-set distances of sinusoidal pairs from tests/oracles.py at spacing RES/4:
# (amp1, k1, amp2, k2) -> (closure, boundary)
SINE_ORACLE = {
    (0.05, 1, 0.03, 1): (0.02, 0.02),
    (0.05, 1, -0.02, 1): (0.07, 0.07),
    (0.02, 2, 0.01, 1): (0.02735782564606904, 0.02735782564606904),
}


def sine(a, k=1):
    return BoundaryProfile.from_function(lambda x: a * np.sin(2 * np.pi * k * x), 1.0, R0, 1.0)


def domain(profile):
    return build_domain(profile, 1.0, 1.0, CONST)


def flat(level=0.0):
    return domain(BoundaryProfile.flat(1.0, R0, 1.0, level))


def test_flat_domain_is_valid_with_unit_area():
    d = flat()
    assert d.area == pytest.approx(1.0, abs=1e-14)
    assert [label for label, ok, _ in assumption_report(d) if ok] == ["2a", "2b", "2c", "2d"]


def test_area_bound_is_literal():
    with pytest.raises(AreaBoundViolated) as info:
        build_domain(BoundaryProfile.flat(1.0, R0, 1.0), 1.0, 1.0, (R0, 1.0, 2.0))
    assert info.value.assumption == "2a"


def test_sine_area_matches_closed_form():
    d = domain(sine(0.05))
    x = np.linspace(0.0, 1.0, 200001)
    trapezoid = 1.0 - np.trapezoid(d.phi(x), x)
    assert d.area == pytest.approx(1.0, abs=1e-10)
    assert d.area == pytest.approx(trapezoid, abs=1e-10)


def test_rough_profile_rejected():
    # second divided difference 10 L / r0
    kink = BoundaryProfile.from_function(lambda x: 0.5 * 10 / R0 * (x - 0.5) ** 2, 1.0, R0, 1.0)
    with pytest.raises(ProfileTooRough) as info:
        domain(kink)
    assert info.value.assumption == "2c"


def test_profile_too_close_to_top():
    with pytest.raises(ProfileTooRough) as info:
        build_domain(BoundaryProfile.flat(1.0, R0, 1.0, 0.95), 1.0, 1.0, CONST)
    assert info.value.assumption == "2b"


def test_sigma_must_hold_boundary_ball():
    with pytest.raises(SigmaBallViolated):
        build_domain(BoundaryProfile.flat(1.0, R0, 1.0), 1.0, 1.0, CONST, sigma=(0.45, 0.55))


def test_knots_must_span_width():
    p = BoundaryProfile(np.linspace(0, 0.9, 10), np.zeros(10), R0, 1.0)
    with pytest.raises(ValueError):
        build_domain(p, 1.0, 1.0, CONST)


def test_identical_domains_have_zero_distances():
    d = domain(sine(0.05))
    rep = distance_report(d, d, RES)
    assert rep.d_H == rep.d_m == rep.d_boundary == 0.0


@pytest.mark.parametrize("delta", [0.003, 0.01, 0.05])
def test_flat_shift_distances_equal_shift(delta):
    a, b = flat(), flat(-delta)
    rep = distance_report(a, b, R0 / 200)
    for value in (rep.d_H, rep.d_m, rep.d_boundary):
        assert value == pytest.approx(delta, abs=1e-12)


def test_nested_modified_distance():
    outer, inner = flat(), flat(0.02)
    assert modified_distance(outer, inner, RES) == pytest.approx(0.02, abs=1e-12)


@pytest.mark.parametrize("key", sorted(SINE_ORACLE))
def test_sine_pairs_match_point_set_oracle(key):
    a1, k1, a2, k2 = key
    d1, d2 = domain(sine(a1, k1)), domain(sine(a2, k2))
    closure, bnd = SINE_ORACLE[key]
    assert abs(hausdorff_distance(d1, d2, RES) - closure) <= 2 * RES
    assert abs(boundary_hausdorff(d1, d2, RES) - bnd) <= 2 * RES
    # far tighter than the guaranteed bound in practice
    assert abs(hausdorff_distance(d1, d2, RES) - closure) <= 1e-4


def test_distances_are_symmetric():
    d1, d2 = domain(sine(0.05)), domain(sine(0.02, 2))
    assert hausdorff_distance(d1, d2, RES) == hausdorff_distance(d2, d1, RES)
    assert boundary_hausdorff(d1, d2, RES) == boundary_hausdorff(d2, d1, RES)


def test_incompatible_domains():
    a = flat()
    b = build_domain(BoundaryProfile.flat(1.0, R0, 1.0), 1.0, 1.1, CONST)
    with pytest.raises(IncompatibleDomains):
        hausdorff_distance(a, b)


def test_translation_invariance():
    d1, d2 = domain(sine(0.05)), domain(sine(0.02, 2))
    shift = (0.37, -1.25)
    before = distance_report(d1, d2, RES)
    after = distance_report(d1.translated(shift), d2.translated(shift), RES)
    for name in ("d_H", "d_m", "d_boundary"):
        assert getattr(after, name) == pytest.approx(getattr(before, name), abs=RES)


def test_distance_report_csv_row():
    rep = distance_report(flat(), flat(-0.01), RES)
    assert rep.csv_row().split(",")[0] == "0.01"
    assert len(rep.csv_row().split(",")) == 4


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_modified_distance_never_exceeds_hausdorff(seed):
    rng = np.random.default_rng(seed)
    d1 = domain(random_profile(1.0, R0, 1.0, rng))
    d2 = domain(random_profile(1.0, R0, 1.0, rng))
    rep = distance_report(d1, d2, R0 / 50)
    assert 0.0 <= rep.d_m <= rep.d_H
    assert rep.d_boundary >= 0.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_random_profiles_are_admissible(seed):
    p = random_profile(1.0, R0, 1.0, np.random.default_rng(seed))
    _, curvature = p.roughness()
    assert curvature * R0 <= 1.0
    domain(p)


def test_bump_mode_support_and_peak():
    mode = bump_mode(1.0, 0.2)
    x = np.linspace(0, 1, 1001)
    y = mode(x)
    assert y.max() == pytest.approx(1.0)
    assert np.all(np.abs(y[(x <= 0.2) | (x >= 0.8)]) < 1e-15)


def test_distance_ratio_sweep_is_bounded(rng):
    worst, used = distance_ratio_sweep(flat(), rng, n_pairs=10)
    assert used > 0
    assert 1.0 <= worst < 10.0


def test_profile_perturbation_and_shift():
    p = sine(0.05)
    assert np.allclose(p.shifted(0.01)(np.array([0.25])), 0.06)
    q = p.perturbed(bump_mode(1.0, 0.2), 0.01)
    assert q(np.array([0.5]))[0] == pytest.approx(0.01, abs=1e-12)
