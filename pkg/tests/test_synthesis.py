from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisomult.errors import (
    ConfigurationError,
    InvalidArgumentError,
    PreconditionViolation,
    ResolutionError,
)
from anisomult.geometry import InscribedInterval, construct_interval
from anisomult.synthesis import (
    SmoothCutoff,
    build_lattice_sum,
    build_test_function,
    central_difference,
    certify_symbol_estimates,
    flat_step,
    flat_step_derivative,
    probe_grid,
    select_N,
    synthesize_symbol,
)
from anisomult.trig import TestPolynomialPair
from anisomult.weights import constant_order, isotropic_power

from conftest import constant_profile


@pytest.fixture(scope="module")
def flat_instance(bump):
    prof = constant_profile(1)
    I = InscribedInterval(np.array([30.0]), np.array([5.0]), 1.0)
    return prof, synthesize_symbol(1, [5.0], I, 2.0, prof, bump, 1.0)


def _stage(bump, xi, rho=0.5, lam=1.0):
    prof = isotropic_power(len(xi), rho)
    I = construct_interval(prof, xi, 1.0)
    return prof, synthesize_symbol(1, xi, I, lam, prof, bump, 1.0)


# ---------------------------------------------------------------- order selection


@pytest.mark.parametrize("ratio,N", [(3, 1), (9.99, 1), (10, 2), (20.9, 2), (21, 3), (78, 6), (104.9, 6), (1e6, 706)])
def test_select_N(ratio, N):
    assert select_N(ratio) == N


@given(st.floats(3, 1e9))
def test_select_N_is_largest(ratio):
    N = select_N(ratio)
    assert N * (2 * N + 1) <= ratio < (N + 1) * (2 * N + 3)


def test_select_N_needs_room():
    with pytest.raises(PreconditionViolation):
        select_N(2.9)


# ---------------------------------------------------------------- cutoff


@pytest.mark.parametrize("order", [None, 1, 3, 6])
def test_flat_step_ends(order):
    np.testing.assert_array_equal(flat_step([-1.0, 0.0, 1.0, 2.0], order), [0.0, 0.0, 1.0, 1.0])
    assert flat_step(0.5, order) == pytest.approx(0.5, abs=1e-15)


@given(st.floats(0, 1), st.sampled_from([None, 1, 2, 5]))
def test_flat_step_symmetry_and_range(y, order):
    a, b = flat_step(y, order), flat_step(1 - y, order)
    assert a + b == pytest.approx(1.0, abs=1e-13)
    assert -1e-15 <= a <= 1 + 1e-15


@pytest.mark.parametrize("order", [None, 2, 4])
def test_flat_step_derivative(order):
    y = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    fd = (flat_step(y + h, order) - flat_step(y - h, order)) / (2 * h)
    np.testing.assert_allclose(flat_step_derivative(y, order), fd, atol=1e-7)
    assert np.all(np.diff(flat_step(np.linspace(0, 1, 200), order)) >= 0)


@pytest.mark.parametrize("order", [None, 3])
def test_cutoff_plateau_and_support(bump, order):
    phi = SmoothCutoff(bump.L, 2, order)
    L = bump.L
    assert np.all(phi(np.array([[0.0, 0.0], [L / 4, -L / 4], [0.2 * L, 0.1 * L]])) == 1.0)
    assert np.all(phi(np.array([[L / 2, 0.0], [0.0, -0.6 * L], [L, L]])) == 0.0)


# ---------------------------------------------------------------- lattice sum


@given(st.floats(-400, 400))
@settings(max_examples=60, deadline=None)
def test_nearest_lattice_point_matches_full_sum(bump, eta):
    lat = build_lattice_sum(4, SmoothCutoff(bump.L))
    assert lat(np.array([eta]))[0] == pytest.approx(lat.direct(np.array([eta]))[0], abs=1e-12)


def test_two_dimensional_lattice_factorizes(bump):
    lat = build_lattice_sum((2, 3), SmoothCutoff(bump.L, 2))
    rng = np.random.default_rng(4)
    pts = rng.uniform(-300, 300, size=(200, 2))
    np.testing.assert_allclose(lat(pts), lat.direct(pts), atol=1e-12)


def test_lattice_gradient_matches_differences(bump):
    lat = build_lattice_sum((3, 2), SmoothCutoff(bump.L, 2))
    rng = np.random.default_rng(7)
    pts = rng.uniform(-200, 200, size=(100, 2))
    grad = lat.gradient(pts)
    for j, alpha in enumerate([(1, 0), (0, 1)]):
        fd = central_difference(lat, pts, alpha, np.array([1e-5, 1e-5]))
        np.testing.assert_allclose(grad[:, j], fd, atol=1e-6)


def test_order_length_checked(bump):
    with pytest.raises(InvalidArgumentError):
        build_lattice_sum((1, 2), SmoothCutoff(bump.L, 1))


# ---------------------------------------------------------------- synthesis


@pytest.mark.parametrize("xi,N", [([256.0], (4,)), ([4096.0], (9,)), ([100.0, 50.0], (3, 3))])
def test_stage_orders(bump, xi, N):
    _, inst = _stage(bump, xi)
    assert inst.N == N
    assert np.all(inst.L * (np.asarray(N) + 0.5) / inst.tau <= inst.half_lengths)


def test_support_inside_interval(bump):
    _, inst = _stage(bump, [256.0])
    assert inst.support_checked > 0
    l = inst.half_lengths[0]
    outside = np.concatenate([np.linspace(l * (1 + 1e-9), 4 * l, 500), -np.linspace(l * (1 + 1e-9), 4 * l, 500)])
    assert np.abs(inst.sigma(outside[:, None])).max() == 0.0
    assert np.abs(inst.sigma(np.array([[0.0]])))[0] == pytest.approx(1.0)


def test_sigma_bounded_by_lambda(bump):
    _, inst = _stage(bump, [100.0, 50.0], lam=0.5)
    pts = probe_grid(inst, per_axis=101)
    assert np.abs(inst.sigma(pts)).max() <= 0.5 * (1 + 1e-14)


def test_nonpositive_lambda_rejected(bump):
    prof = isotropic_power(1, 0.5)
    I = construct_interval(prof, [256.0], 1.0)
    with pytest.raises(InvalidArgumentError):
        synthesize_symbol(1, [256.0], I, 0.0, prof, bump)


def test_instance_record_round_trip(bump):
    _, inst = _stage(bump, [256.0])
    d = inst.to_dict()
    assert d["N"] == [4] and d["xi"] == [256.0] and d["L"] == pytest.approx(24 * math.pi)
    assert inst.scaled(3.0).lambda_k == 3.0 * inst.lambda_k


# ---------------------------------------------------------------- symbol estimates


def test_chain_rule_with_constant_profile(flat_instance):
    # psi = 1 and lambda = 2: the alpha-th ratio is (tau N)^alpha = (3L/2)^alpha on the plateau
    prof, inst = flat_instance
    cert = certify_symbol_estimates(inst, prof, constant_order(1, 2.0))
    L = inst.L
    assert cert.max_ratio["0"] == pytest.approx(1.0, rel=1e-12)
    assert cert.max_ratio["1"] == pytest.approx(1.5 * L, rel=1e-4)
    assert cert.max_ratio["2"] == pytest.approx((1.5 * L) ** 2, rel=1e-4)


def test_analytic_gradient_ratio(flat_instance):
    prof, inst = flat_instance
    cert = certify_symbol_estimates(inst, prof, constant_order(1, 2.0))
    pts = probe_grid(inst)
    analytic = inst.tau[0] * np.abs(inst.lattice.gradient(pts * inst.tau)).max()
    assert cert.max_ratio["1"] == pytest.approx(analytic, rel=1e-4)


def test_step_halving_detects_coarse_steps(flat_instance):
    prof, inst = flat_instance
    with pytest.raises(ResolutionError):
        certify_symbol_estimates(inst, prof, constant_order(1, 2.0), step_factor=0.3)


def test_third_order_differences_refused(flat_instance):
    prof, inst = flat_instance
    with pytest.raises(InvalidArgumentError):
        certify_symbol_estimates(inst, prof, constant_order(1), alpha_max=3)


def test_symbol_constants_uniform_across_stages(bump):
    certs = []
    for xi in (256.0, 4096.0, 65536.0):
        prof, inst = _stage(bump, [xi])
        certs.append(certify_symbol_estimates(inst, prof, constant_order(1)))
    for key in ("0", "1", "2"):
        vals = [c.max_ratio[key] for c in certs]
        assert max(vals) / min(vals) < 2.0
    assert all(max(c.halving_change.values()) < 0.10 for c in certs)


# ---------------------------------------------------------------- test functions


@pytest.mark.parametrize("xi", [[256.0], [100.0, 50.0]])
def test_multiplier_identity(bump, xi):
    _, inst = _stage(bump, xi)
    spec = build_test_function(inst, TestPolynomialPair(inst.N, bump))
    assert spec.identity_error < 1e-10 and spec.grid_points > 0


def test_spatial_test_function_scaling(bump):
    _, inst = _stage(bump, [256.0])
    pair = TestPolynomialPair(inst.N, bump)
    spec = build_test_function(inst, pair)
    x = np.linspace(-3, 3, 7)[:, None]
    np.testing.assert_allclose(spec.u(x), pair.g(x / inst.tau) / inst.tau[0])
    np.testing.assert_allclose(spec.sigma_u(x), inst.lambda_k * pair.h(x / inst.tau) / inst.tau[0])


def test_order_mismatch_rejected(bump):
    _, inst = _stage(bump, [256.0])
    with pytest.raises(ConfigurationError):
        build_test_function(inst, TestPolynomialPair((5,), bump))


def test_lattice_mismatch_rejected(bump):
    _, inst = _stage(bump, [256.0])
    with pytest.raises(ConfigurationError):
        build_test_function(inst, TestPolynomialPair(inst.N, bump, L=bump.L + 2 * np.pi))
