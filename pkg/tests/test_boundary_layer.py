import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import linregress

from beamlab.acceptance import draw_regime_case
from beamlab.boundary_layer import (LiftError, eigenvector_bl, eigenvector_interior, interior_trace,
                                    lift_boundary, lift_leading_order, lift_matrix, lifted_trace,
                                    system_matrix)
from beamlab.charpoly import CharPolyParams, RegimeError, asym_roots_critical
from beamlab.dispersion import Wavevector

nonzero = st.floats(-10, 10).filter(lambda v: abs(v) > 1e-2)
angles = st.floats(0.05, math.pi / 2 - 0.05)


def critical_samples(count, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p, kmod, theta, solve = draw_regime_case("critical", rng)
        try:
            triple = solve()
        except RegimeError:
            continue
        if triple.certified:
            out.append((p, kmod, theta, triple))
    return out


def test_interior_eigenvector_example():
    vec = eigenvector_interior(Wavevector(1.0, 1.0), 1 / math.sqrt(2), 0.0)
    assert vec.U == 1
    assert vec.W == pytest.approx(-1.0)
    assert vec.B == pytest.approx(1j * math.sqrt(2))


@given(nonzero, nonzero, st.floats(0.05, 1), angles)
def test_interior_eigenvector_identities(k, m, w, gamma):
    vec = eigenvector_interior(Wavevector(k, m), w, gamma)
    assert 1j * k * vec.U + 1j * m * vec.W == pytest.approx(0, abs=1e-12 * abs(k))
    rhs = 1j * (k * math.cos(gamma) - m * math.sin(gamma)) / m
    assert vec.B * w == pytest.approx(rhs, rel=1e-12, abs=1e-14)


@given(st.floats(0.1, 10), st.floats(-math.pi, math.pi), angles)
def test_interior_wave_solves_inviscid_system(kmod, theta, gamma):
    kv = Wavevector.from_polar(kmod, theta, gamma)
    w = math.sin(theta)
    if min(abs(kv.k), abs(kv.m), abs(w)) < 1e-3:
        return
    vec = eigenvector_interior(kv, w, gamma).as_array()
    params = CharPolyParams(w, kv.k, 0.0, 1.0, 1.0, gamma)
    residual = system_matrix(kv.k, -1j * kv.m, w, params) @ vec
    assert np.linalg.norm(residual) <= 1e-10 * np.linalg.norm(vec)


def test_interior_eigenvector_domain_errors():
    with pytest.raises(ValueError):
        eigenvector_interior(Wavevector(1.0, 0.0), 0.5, 0.3)
    with pytest.raises(ValueError):
        eigenvector_interior(Wavevector(1.0, 1.0), 0.0, 0.3)


@given(nonzero, st.complex_numbers(min_magnitude=0.1, max_magnitude=1e3), st.floats(0.1, 1), angles)
def test_boundary_layer_mode_is_divergence_free(k, lam, w, gamma):
    p = CharPolyParams(w, k, 1e-4, 1.0, 1.0, gamma)
    vec = eigenvector_bl(k, lam, w, p)
    assert vec.W == pytest.approx(1j * k / lam, rel=1e-14)
    assert 1j * k * vec.U - lam * vec.W == pytest.approx(0, abs=1e-12 * abs(k))


def test_boundary_layer_mode_rejects_zero_rate():
    p = CharPolyParams(0.5, 1.0, 1e-4, 1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        eigenvector_bl(1.0, 0.0, 0.5, p)


def test_boundary_layer_modes_lie_in_kernel_at_certified_roots():
    for p, _, _, triple in critical_samples(100):
        for lam in triple.lambdas:
            mat = system_matrix(p.k, lam, p.omega, p)
            vec = eigenvector_bl(p.k, lam, p.omega, p).as_array()
            residual = np.linalg.norm(mat @ vec)
            assert residual <= 1e-8 * np.linalg.norm(mat, 2) * np.linalg.norm(vec)


def test_lift_of_zero_trace_vanishes():
    p, _, _, triple = critical_samples(1, seed=3)[0]
    lift = lift_boundary(np.zeros(3), triple, p.k, p.omega, p)
    assert np.all(lift.a == 0)


def test_lift_cancels_incident_trace():
    for p, kmod, theta, triple in critical_samples(40, seed=4):
        trace = interior_trace(Wavevector.from_polar(kmod, theta, p.gamma), p.omega, p.gamma)
        lift = lift_boundary(trace, triple, p.k, p.omega, p)
        total = lifted_trace(lift.a, triple.lambdas, p.k, p.omega, p) + trace
        assert np.max(np.abs(total)) <= 1e-10 * np.max(np.abs(trace))


def test_lift_rejects_repeated_roots():
    p = CharPolyParams(0.6, 1.0, 1e-4, 1.0, 1.0, 0.6)
    with pytest.raises(LiftError):
        lift_boundary(np.ones(3), np.array([3 + 3j, 3 + 3j, 50 - 50j]), 1.0, 0.6, p)


def test_lift_determinant_tracks_rate_ratios():
    for p, _, _, triple in critical_samples(100, seed=6):
        lam = triple.lambdas
        reference = sum(abs(p.k * lam[i] / lam[j]) for i in range(3) for j in range(3) if i != j)
        det = abs(np.linalg.det(lift_matrix(p.k, lam, p.omega, p)))
        assert 0.1 <= det / reference <= 10


def test_leading_order_inverse_converges_to_direct_solve():
    gamma, kmod = math.pi / 4, 2.0
    eps_values = np.geomspace(1e-10, 1e-6, 5)
    errors = []
    for eps in eps_values:
        w = math.sin(gamma) + eps ** (1 / 3)
        theta = math.asin(w)
        p = CharPolyParams(w, kmod * math.sin(theta + gamma), eps, 1.0, 1.0, gamma)
        triple = asym_roots_critical(p, kmod, theta, check=False)
        trace = interior_trace(Wavevector.from_polar(kmod, theta, gamma), w, gamma)
        direct = lift_boundary(trace, triple, p.k, w, p).a
        approx = lift_leading_order(trace, triple.lambdas, p.k, w, p)
        errors.append(np.max(np.abs(approx - direct) / np.abs(direct)))
    assert max(errors) < 1e-2
    assert linregress(np.log(eps_values), np.log(errors)).slope > 0.3
