import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrolab.boundary_data import (
    ConstantField,
    FluxSpec,
    ImpedanceSpec,
    ModulatedFlux,
    PlateauFlux,
    ScaledFlux,
    SmoothImpedance,
    SmoothOnset,
    accessible_samples,
    ratio_deviation,
    validate_flux_pair,
    validate_impedance,
)
from corrolab.errors import (
    EarlyTimeMismatch,
    FluxesProportional,
    ImpedanceOutOfBounds,
    LowerBoundViolated,
    SupportViolated,
)
from corrolab.experiments import default_setup
from corrolab.geometry import BoundaryProfile

R0 = 0.1


def _flat_setup(**kw):
    return default_setup(profile=BoundaryProfile.flat(1.0, R0, 1.0), **kw)


@pytest.fixture(scope="module")
def flat_setup():
    return _flat_setup()


def _spec(g, like):
    return FluxSpec(g, like.T, like.t1, like.E, like.Phi1, like.r0, "h")


def test_default_pair_validates(setup):
    report = validate_flux_pair(setup.g, setup.gt, setup.domain)
    labels = [c[0] for c in report.checks]
    assert labels == ["3a", "3b", "3c", "3d", "3e", "3f", "3g"]
    assert all(ok for _, ok, _ in report.checks)
    assert report.E <= setup.g.E
    assert report.Phi0 > 0


def test_phi0_closed_form_time_modulation():
    # g~/g = 1 + ramp(t) on the plateau: mean 1 + 3/8 over [0, 1], so
    # Phi0^2 = |supp g| * (int_0^1 r^2 - (3/8)^2) with r = (t - 1/4)/(3/4) after t1.
    s = _flat_setup(shape="time")
    pts, w = accessible_samples(s.domain)
    support = float(w[s.g(pts, 0.0) > 0].sum())
    assert support == pytest.approx(2.75, abs=1e-12)
    ramp_sq = 0.75 / 3
    expected = np.sqrt(support * (ramp_sq - 0.375**2))
    report = validate_flux_pair(s.g, s.gt, s.domain)
    assert report.Phi0 == pytest.approx(expected, rel=1e-12)
    assert report.Phi0 == pytest.approx(0.5484352742120077, rel=1e-12)
    window = np.sqrt(support * 0.75 * (1 / 3 - 0.25))
    assert report.Phi0_window == pytest.approx(window, rel=1e-12)


def test_proportional_fluxes_rejected(setup):
    with pytest.raises(FluxesProportional) as exc:
        validate_flux_pair(setup.g, setup.g, setup.domain)
    assert exc.value.assumption == "3f"
    doubled = _spec(ScaledFlux(setup.g, 2.0), setup.g)
    with pytest.raises(EarlyTimeMismatch):
        validate_flux_pair(setup.g, doubled, setup.domain)


def test_early_mismatch_rejected(setup):
    early = ModulatedFlux(setup.g.g, 1.0, 0.0, setup.T, "time")
    with pytest.raises(EarlyTimeMismatch) as exc:
        validate_flux_pair(setup.g, _spec(early, setup.g), setup.domain)
    assert exc.value.assumption == "3e"


def test_lower_bound_violation(setup):
    weak = FluxSpec(setup.g.g, setup.T, setup.t1, setup.g.E, 2 * setup.g.Phi1, R0, "g")
    with pytest.raises(LowerBoundViolated) as exc:
        validate_flux_pair(weak, setup.gt, setup.domain)
    assert exc.value.assumption == "3g"


def test_support_near_inaccessible_rejected(setup):
    everywhere = _spec(ConstantField(1.0), setup.g)
    with pytest.raises(SupportViolated) as exc:
        validate_flux_pair(everywhere, everywhere, setup.domain)
    assert exc.value.assumption == "3b"


def test_lipschitz_bound_enforced():
    s = _flat_setup(E=0.5)
    with pytest.raises(SupportViolated) as exc:
        validate_flux_pair(s.g, s.gt, s.domain)
    assert exc.value.assumption == "3d"


def test_plateau_weight_profile(flat_domain):
    f = PlateauFlux(1.0, R0, flat_domain.phi, 1.0)
    y = np.array([0.05, 0.12, 0.15, 0.18, 0.5])
    pts = np.column_stack([np.full_like(y, 0.5), y])
    np.testing.assert_allclose(f.weight(pts), [0.0, 0.0, 0.5, 1.0, 1.0], atol=1e-12)


def test_modulation_vanishes_before_t1():
    f = ModulatedFlux(ConstantField(2.0), 3.0, 0.25, 1.0, "space", 1.0)
    pts = np.array([[0.0, 1.0], [0.5, 1.0], [1.0, 1.0]])
    np.testing.assert_array_equal(f(pts, 0.2), [2.0, 2.0, 2.0])
    np.testing.assert_allclose(f(pts, 1.0), [2.0, 5.0, 8.0])
    with pytest.raises(ValueError):
        ModulatedFlux(ConstantField(1.0), 1.0, 0.25, 1.0, "radial")(pts, 0.5)


def test_smooth_onset():
    f = SmoothOnset(ConstantField(3.0), 0.5)
    pts = np.zeros((1, 2))
    assert f(pts, 0.0)[0] == 0.0
    assert f(pts, 0.25)[0] == pytest.approx(1.5)
    assert f(pts, 0.5)[0] == pytest.approx(3.0)
    assert f(pts, 0.9)[0] == 3.0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(0.0, 2.0))
def test_ratio_deviation_piecewise_linear_exact(flat_setup, t1, c):
    # g~/g = 1 + c (t - t1)/(1 - t1) after t1, uniform in space on a unit-weight support
    s = flat_setup
    base = ConstantField(1.0)
    g = FluxSpec(base, 1.0, t1, 4.0, 0.05, R0)
    gt = FluxSpec(ModulatedFlux(base, c, t1, 1.0, "time"), 1.0, t1, 4.0, 0.05, R0)
    got = ratio_deviation(g, gt, s.domain, 0.0, 1.0, n_times=5, breakpoints=(t1,))
    # mean of r over [0,1] is (1-t1)/2, mean of r^2 is (1-t1)/3
    a = 1 - t1
    var = c**2 * (a / 3 - a**2 / 4)
    length = float(accessible_samples(s.domain)[1].sum())
    assert got == pytest.approx(np.sqrt(length * var), rel=1e-10, abs=1e-14)


def test_impedance_bounds(flat_domain):
    assert validate_impedance(ImpedanceSpec.constant(5.0, 10.0), flat_domain, 1.0)[1][1]
    with pytest.raises(ImpedanceOutOfBounds):
        validate_impedance(ImpedanceSpec.constant(5.0, 4.0), flat_domain, 1.0)
    negative = ImpedanceSpec(ConstantField(-1.0), 1.0, False, "neg")
    with pytest.raises(ImpedanceOutOfBounds):
        validate_impedance(negative, flat_domain, 1.0)


def test_smooth_impedance_values():
    gam = SmoothImpedance(0.3, 0.2, R0, 1.0, slope=1.0, y_ref=0.0)
    pts = np.array([[0.0, 0.0], [0.5, 0.0], [0.5, 0.02]])
    np.testing.assert_allclose(gam(pts, 0.0), [3.0, 5.0, 5.2], rtol=1e-12)
