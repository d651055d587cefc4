from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisomult.errors import InvalidArgumentError, InvalidPairError, InvalidPointError, ProfileViolationError
from anisomult.weights import (
    beals_radial,
    check_coordinate_monotone,
    check_slowly_varying,
    constant_order,
    custom_order,
    custom_profile,
    evaluate_order,
    evaluate_profile,
    isotropic_power,
    nagel_stein,
    nagel_stein_order,
    order_from_config,
    power_order,
    profile_from_config,
)

from conftest import constant_profile

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


# ---------------------------------------------------------------- evaluation


def test_beals_radial_at_origin():
    np.testing.assert_allclose(evaluate_profile(beals_radial(1, 1.0), [0.0]), [1.0])


def test_nagel_stein_bracket_arithmetic():
    prof = nagel_stein([1, 2], [1, 1])
    np.testing.assert_allclose(evaluate_profile(prof, [1.0, 4.0]), [4.0, 16.0], rtol=1e-15)


def test_isotropic_power_in_plane():
    prof = isotropic_power(2, 0.5)
    np.testing.assert_allclose(evaluate_profile(prof, [3.0, 4.0]), [np.sqrt(6.0)] * 2, rtol=1e-15)


def test_batch_evaluation_shape():
    prof = isotropic_power(2, 0.5)
    assert evaluate_profile(prof, np.zeros((7, 2))).shape == (7, 2)


@pytest.mark.parametrize("bad", [[np.nan], [np.inf], [-np.inf]])
def test_non_finite_point_rejected(bad):
    with pytest.raises(InvalidPointError):
        evaluate_profile(beals_radial(1), bad)


def test_wrong_dimension_rejected():
    with pytest.raises(InvalidPointError):
        evaluate_profile(isotropic_power(2, 0.5), [1.0, 2.0, 3.0])


def test_non_positive_component_flagged():
    prof = custom_profile([lambda x: x[:, 0]])
    with pytest.raises(ProfileViolationError):
        evaluate_profile(prof, [-1.0])


def test_order_outside_declared_bound_flagged():
    lam = custom_order(lambda x: np.full(len(x), 2.0), 1.0, 1)
    with pytest.raises(ProfileViolationError):
        evaluate_order(lam, [0.0])


def test_profile_needs_one_component_per_axis():
    with pytest.raises(InvalidArgumentError):
        nagel_stein([1, 2], [1])


@pytest.mark.parametrize("record,expected", [
    ({"family": "isotropic-power", "rho": 0.5}, "isotropic-power"),
    ({"family": "beals-radial", "rho": 1.0}, "beals-radial"),
    ({"family": "nagel-stein", "L": [1, 2], "rho": [0.5, 0.5]}, "nagel-stein"),
])
def test_profiles_from_records(record, expected):
    n = len(record.get("L", [0]))
    assert profile_from_config(record, n).family == expected


def test_unknown_family_record_rejected():
    with pytest.raises(InvalidArgumentError):
        profile_from_config({"family": "spline"}, 1)


@pytest.mark.parametrize("record,value", [
    ({"family": "constant", "a": 2.5}, 2.5),
    ({"family": "power", "m": 1.0}, 1.0 / 4.0),
    ({"family": "nagel-stein", "L": [1.0], "m": 1.0}, 1.0 / 4.0),
])
def test_orders_from_records(record, value):
    lam = order_from_config(record, 1)
    np.testing.assert_allclose(lam([3.0]), [value])


def test_negative_order_exponent_rejected():
    with pytest.raises(InvalidArgumentError):
        power_order(1, -1.0)


# ---------------------------------------------------------------- properties


@given(st.lists(finite, min_size=3, max_size=3), st.permutations(range(3)), st.floats(0, 2))
@settings(max_examples=60, deadline=None)
def test_isotropic_profile_is_permutation_invariant(xi, perm, rho):
    prof = isotropic_power(3, rho)
    xi = np.array(xi)
    np.testing.assert_allclose(prof(xi[list(perm)]), prof(xi), rtol=1e-14)


@given(st.lists(finite, min_size=2, max_size=2), st.floats(0, 3), st.floats(0, 3))
@settings(max_examples=60, deadline=None)
def test_nagel_stein_components_at_least_one(xi, r1, r2):
    prof = nagel_stein([1.0, 2.0], [r1, r2])
    assert np.all(prof(np.array(xi)) >= 1.0)


@given(st.lists(finite, min_size=2, max_size=2))
@settings(max_examples=40, deadline=None)
def test_order_stays_in_declared_range(xi):
    lam = nagel_stein_order([1.0, 2.0], 0.7)
    v = evaluate_order(lam, np.array(xi))
    assert np.all((v > 0) & (v <= lam.sup_bound))


@given(st.floats(0.01, 100), st.floats(1.01, 2.0), st.floats(1.01, 2.0), st.floats(0, 2))
@settings(max_examples=60, deadline=None)
def test_coordinate_monotone_transitive(a, s1, s2, rho):
    prof, lam = isotropic_power(1, rho), power_order(1, 0.5)
    eta, xi, zeta = [a], [a * s1], [a * s1 * s2]
    first = check_coordinate_monotone(prof, lam, [(eta, xi)]).passed
    second = check_coordinate_monotone(prof, lam, [(xi, zeta)]).passed
    if first and second:
        assert check_coordinate_monotone(prof, lam, [(eta, zeta)]).passed


def test_profile_components_continuous_under_refinement():
    prof = nagel_stein([1.0, 2.0], [0.5, 0.5])
    xi = np.array([[3.0, -7.0]])
    gaps = [np.abs(prof(xi + h) - prof(xi)).max() for h in (1e-2, 1e-4, 1e-6)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-5


# ---------------------------------------------------------------- slowly varying


def test_constant_profile_ratios_are_one():
    rep = check_slowly_varying(constant_profile(2), constant_order(2), np.ones((5, 2)))
    np.testing.assert_array_equal(rep.psi_ratio_min, [1.0, 1.0])
    np.testing.assert_array_equal(rep.psi_ratio_max, [1.0, 1.0])
    assert rep.order_ratio_min == rep.order_ratio_max == 1.0 and rep.passed


def test_nagel_stein_family_slowly_varying():
    rng = np.random.default_rng(3)
    probes = rng.uniform(-1e3, 1e3, size=(200, 2))
    rep = check_slowly_varying(nagel_stein([1, 2], [0.5, 0.5]), nagel_stein_order([1, 2], 0.3), probes)
    assert rep.passed
    assert np.all(rep.psi_ratio_min > 0.1) and np.all(rep.psi_ratio_max < 10)


def test_gaussian_weight_not_slowly_varying():
    prof = custom_profile([lambda x: np.exp(x[:, 0] ** 2)])
    rep = check_slowly_varying(prof, constant_order(1), np.linspace(-10, 10, 41))
    assert not rep.passed
    assert rep.psi_ratio_max[0] > 10.0


def test_empty_probe_set_rejected():
    with pytest.raises(InvalidArgumentError):
        check_slowly_varying(beals_radial(1), constant_order(1), np.zeros((0, 1)))


def test_box_constant_independent_of_ratio_bounds():
    prof = isotropic_power(1, 1.0)
    small = check_slowly_varying(prof, constant_order(1), [10.0], box_constant=0.01)
    large = check_slowly_varying(prof, constant_order(1), [10.0], box_constant=0.9)
    assert small.lower == large.lower and small.upper == large.upper
    assert small.psi_ratio_max[0] < large.psi_ratio_max[0]


# ---------------------------------------------------------------- coordinate monotone


def test_radial_power_monotone():
    pairs = [([0.5, 1.0], [1.0, 2.0]), ([-3.0, 0.0], [4.0, 0.1])]
    assert check_coordinate_monotone(isotropic_power(2, 0.7), constant_order(2), pairs).passed


def test_decreasing_order_monotone():
    pairs = [([0.1, 0.2], [2.0, 3.0]), ([5.0, -1.0], [-6.0, 8.0])]
    assert check_coordinate_monotone(isotropic_power(2, 0.5), nagel_stein_order([1, 2], 1.5), pairs).passed


def test_decreasing_weight_fails_monotone():
    prof = custom_profile([lambda x: 2.0 - np.tanh(x[:, 0])])
    rep = check_coordinate_monotone(prof, constant_order(1), [([1.0], [2.0])])
    assert not rep.passed and rep.violations[0]["axes"] == [0]


def test_pair_without_domination_rejected():
    with pytest.raises(InvalidPairError):
        check_coordinate_monotone(beals_radial(1), constant_order(1), [([2.0], [1.0])])
