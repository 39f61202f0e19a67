import math
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamlab.dispersion import (NonIncidentError, PhysParams, Wavevector, criticality, group_velocity,
                                incident_branch, omega, rotate_coords)

angles = st.floats(0.01, math.pi / 2 - 0.01)
components = st.floats(-50, 50).filter(lambda v: abs(v) > 1e-3)


def test_rotate_identity_and_quarter_turn():
    assert np.allclose(rotate_coords(1.0, 0.0, 0.0), (1.0, 0.0), atol=1e-15)
    assert np.allclose(rotate_coords(1.0, 0.0, math.pi / 2), (0.0, -1.0), atol=1e-15)


def test_rotate_diagonal():
    x, y = rotate_coords(1.0, 1.0, math.pi / 4)
    assert x == pytest.approx(math.sqrt(2), rel=1e-14)
    assert y == pytest.approx(0.0, abs=1e-15)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-math.pi, math.pi))
def test_rotation_preserves_norm(x1, x2, angle):
    x, y = rotate_coords(x1, x2, angle)
    assert math.hypot(x, y) == pytest.approx(math.hypot(x1, x2), rel=1e-12, abs=1e-12)


def test_omega_examples():
    assert omega(Wavevector(1.0, 0.0), 0.0) == pytest.approx(1.0)
    assert omega(Wavevector(1.0, 1.0), math.pi / 4) == pytest.approx(0.0, abs=1e-15)
    assert omega(Wavevector(1.0, 1.0), math.pi / 4, branch=-1) == pytest.approx(0.0, abs=1e-15)
    kv = Wavevector.from_polar(3.0, math.pi / 6, math.pi / 6)
    assert omega(kv, math.pi / 6) == pytest.approx(0.5, rel=1e-14)


def test_omega_rejects_zero_wavevector():
    with pytest.raises(ValueError):
        omega(Wavevector(0.0, 0.0), 0.3)
    with pytest.raises(ValueError):
        group_velocity(Wavevector(0.0, 0.0), 0.3)


@given(components, components, st.floats(0.01, 100), angles)
def test_omega_zero_homogeneous(k, m, t, gamma):
    kv = Wavevector(k, m)
    assert omega(kv.scaled(t), gamma) == pytest.approx(omega(kv, gamma), abs=1e-12)


@given(components, components, angles, st.sampled_from([1, -1]))
def test_omega_bounded(k, m, gamma, branch):
    assert abs(omega(Wavevector(k, m), gamma, branch)) <= 1 + 1e-15


@given(st.floats(0.01, 100), st.floats(1e-6, math.pi - 1e-6), angles)
def test_polar_identity(kmod, theta, gamma):
    kv = Wavevector.from_polar(kmod, theta, gamma)
    assert omega(kv, gamma) == pytest.approx(math.sin(theta), abs=1e-12)


@given(st.floats(0.01, 100), st.floats(-math.pi + 1e-3, math.pi - 1e-3), angles)
def test_polar_round_trip(kmod, theta, gamma):
    kv = Wavevector.from_polar(kmod, theta, gamma)
    assert kv.kmod == pytest.approx(kmod, rel=1e-12)
    assert float(kv.theta(gamma)) == pytest.approx(theta, rel=1e-12, abs=1e-12)


def test_incident_branch_examples():
    g = math.pi / 6
    assert incident_branch(Wavevector.from_polar(1.0, g, g), g) == pytest.approx(0.5)
    assert incident_branch(Wavevector.from_polar(1.0, g + math.pi, g), g) == pytest.approx(-0.5)
    with pytest.raises(NonIncidentError):
        incident_branch(Wavevector(1.0, 1.0), math.pi / 4)


def test_incident_branch_random_sample_has_downward_group_velocity():
    rng = np.random.default_rng(3)
    k, m = rng.normal(size=(2, 10_000)) * 5
    gamma = rng.uniform(0.05, 1.5, 10_000)
    kv = Wavevector(k, m)
    w = incident_branch(kv, gamma)
    keep = np.isfinite(w)
    assert keep.mean() > 0.99
    branch = np.sign(w * omega(kv, gamma))
    _, vertical = group_velocity(kv, gamma, branch)
    assert np.all(vertical[keep] < 0)


@given(st.floats(0.1, 20), st.floats(-0.2, 0.2), st.sampled_from([0.0, math.pi]), angles)
def test_incident_frequency_has_sign_of_k_near_criticality(kmod, offset, lobe, gamma):
    kv = Wavevector.from_polar(kmod, gamma + offset * min(gamma, math.pi / 2 - gamma) + lobe, gamma)
    assert np.sign(incident_branch(kv, gamma)) == np.sign(kv.k)


def test_incident_branch_array_marks_degenerate_as_nan():
    w = incident_branch(Wavevector(np.array([1.0, 1.0]), np.array([1.0, 0.0])), math.pi / 4)
    assert math.isnan(w[0]) and np.isfinite(w[1])


def test_group_velocity_closed_form_example():
    g = math.pi / 6
    kv = Wavevector(1.5 * math.sqrt(3), 1.5)
    expected = -(3 * math.sqrt(3) / 2) * (1.5 * (math.sqrt(3) / 2) + (3 * math.sqrt(3) / 2) * 0.5) / 27
    assert group_velocity(kv, g)[1] == pytest.approx(expected, rel=1e-12)


def test_group_velocity_vertical_vanishes_for_zero_k():
    assert group_velocity(Wavevector(0.0, 2.0), 0.7)[1] == 0


@given(components, components, angles)
def test_group_velocity_orthogonal_to_wavevector(k, m, gamma):
    cg = group_velocity(Wavevector(k, m), gamma)
    assert k * cg[0] + m * cg[1] == pytest.approx(0.0, abs=1e-12 * max(1.0, np.hypot(*cg) * math.hypot(k, m)))


@settings(max_examples=50)
@given(st.floats(0.5, 5), st.floats(0.5, 5), angles, st.sampled_from([1, -1]))
def test_group_velocity_matches_central_differences(k, m, gamma, branch):
    kv = Wavevector(k, m)
    cg = group_velocity(kv, gamma, branch)
    errors = []
    for h in (1e-3, 5e-4):
        dk = (omega(Wavevector(k + h, m), gamma, branch) - omega(Wavevector(k - h, m), gamma, branch)) / (2 * h)
        dm = (omega(Wavevector(k, m + h), gamma, branch) - omega(Wavevector(k, m - h), gamma, branch)) / (2 * h)
        errors.append(math.hypot(dk - cg[0], dm - cg[1]))
    assert errors[1] <= max(errors[0] / 3, 1e-9)


def test_criticality_examples():
    assert criticality(math.sin(0.4), 0.4) == pytest.approx(0.0, abs=1e-16)
    assert criticality(0.0, math.pi / 6) == pytest.approx(-0.25)
    assert criticality(1.0, math.pi / 2) == pytest.approx(0.0, abs=1e-16)


def test_physparams_derives_viscosity():
    p = PhysParams(1e-4, 0.5, 0.4, nu0=2.0, kappa0=3.0)
    assert p.nu == pytest.approx(2e-4) and p.kappa == pytest.approx(3e-4)


@pytest.mark.parametrize("changes, fragment", [
    ({"gamma": 2.0}, "0 < gamma < pi/2"),
    ({"gamma": 0.0}, "0 < gamma < pi/2"),
    ({"eps": 1.5}, "eps"),
    ({"sigma": 1e-3}, "eps**mu"),
    ({"mu": 0.2}, "1/8"),
    ({"delta": 1.0}, "nonlinearity strength"),
    ({"nu0": -1.0}, "positive"),
])
def test_physparams_rejects_inadmissible(changes, fragment):
    values = {"eps": 1e-4, "sigma": 0.5, "gamma": 0.4, **changes}
    with pytest.raises(ValueError, match=re.escape(fragment)):
        PhysParams(**values)

