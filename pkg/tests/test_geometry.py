from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisomult.errors import AssumptionFailure, CertificationImpossible, InvalidArgumentError, PreconditionViolation
from anisomult.geometry import (
    SublevelSet,
    certify_assumptions,
    construct_interval,
    estimate_measure,
    membership,
)
from anisomult.weights import beals_radial, custom_profile, isotropic_power

from conftest import constant_profile, radial_increasing


def _within_3sigma(est, exact):
    return abs(est.value - exact) <= 3.0 * est.stderr + 1e-12


# ---------------------------------------------------------------- membership


@pytest.mark.parametrize("profile,xi", [
    (isotropic_power(2, 0.5), [3.0, -1.0]),
    (beals_radial(1), [7.0]),
    (radial_increasing(2), [0.0, 0.0]),
])
def test_anchor_is_member(profile, xi):
    assert membership(SublevelSet.at(profile, xi), xi)


@given(st.floats(-50, 50), st.floats(0, 1))
@settings(max_examples=60, deadline=None)
def test_radial_membership_reduces_to_radius(x, frac):
    S = SublevelSet.at(beals_radial(1, 0.8), [x])
    assert membership(S, [x * frac])


def test_larger_radius_excluded():
    S = SublevelSet.at(radial_increasing(1), [1.0])
    assert not membership(S, [2.0])


# ---------------------------------------------------------------- measure


def test_interval_measure_within_binomial_error():
    S = SublevelSet.at(radial_increasing(1), [2.0])
    est = estimate_measure(S, [[-4.0, 4.0]], samples=20_000, seed=11)
    assert not est.unbounded and _within_3sigma(est, 4.0)


def test_disc_area_within_binomial_error():
    S = SublevelSet.at(radial_increasing(2), [0.6, 0.8])
    est = estimate_measure(S, [[-2.0, 2.0], [-2.0, 2.0]], samples=40_000, seed=5)
    assert _within_3sigma(est, np.pi)


def test_constant_profile_flagged_unbounded():
    S = SublevelSet.at(constant_profile(2), [1.0, 1.0])
    est = estimate_measure(S, [[-4, 4], [-4, 4]], samples=5_000)
    assert est.unbounded and est.value is None


def test_auto_box_grows_past_set():
    S = SublevelSet.at(radial_increasing(1), [10.0])
    est = estimate_measure(S, None, samples=20_000, seed=2)
    assert not est.unbounded and _within_3sigma(est, 20.0)


@pytest.mark.parametrize("box", [[[1.0, 1.0]], [[2.0, -2.0]], [[3.0, 5.0]]])
def test_degenerate_or_foreign_box_rejected(box):
    S = SublevelSet.at(radial_increasing(1), [0.5])
    with pytest.raises(InvalidArgumentError):
        estimate_measure(S, box, samples=2_000)


def test_too_few_samples_rejected():
    with pytest.raises(InvalidArgumentError):
        estimate_measure(SublevelSet.at(radial_increasing(1), [1.0]), [[-2, 2]], samples=10)


def test_enlarging_box_keeps_estimate():
    S = SublevelSet.at(radial_increasing(2), [1.0, 0.0])
    a = estimate_measure(S, [[-1.5, 1.5]] * 2, samples=40_000, seed=1)
    b = estimate_measure(S, [[-3.0, 3.0]] * 2, samples=40_000, seed=1)
    assert b.value >= a.value - 3.0 * np.hypot(a.stderr, b.stderr)


def test_seeded_estimate_reproducible_and_chunked():
    S = SublevelSet.at(isotropic_power(2, 0.5), [2.0, 1.0])
    a = estimate_measure(S, [[-4, 4]] * 2, samples=30_000, seed=9, chunk=4096)
    b = estimate_measure(S, [[-4, 4]] * 2, samples=30_000, seed=9, chunk=4096, workers=3)
    assert a.value == b.value and a.hits == b.hits


# ---------------------------------------------------------------- inscribed intervals


def test_radial_interval_in_one_dimension():
    I = construct_interval(radial_increasing(1), [2.0], 0.1)
    np.testing.assert_allclose(I.half_lengths, [2.0], rtol=1e-6)
    assert I.measure == pytest.approx(4.0, rel=1e-6)


def test_square_inscribed_in_disc():
    I = construct_interval(radial_increasing(2), [1.0, 1.0], 0.1)
    np.testing.assert_allclose(I.half_lengths, [1.0, 1.0], rtol=1e-6)


def test_constant_profile_interval_is_minimal():
    I = construct_interval(constant_profile(2), [3.0, 1.0], 1.0)
    assert I.unbounded_direction
    np.testing.assert_array_equal(I.half_lengths, [1.0, 1.0])


def test_interval_too_small_raises():
    prof = custom_profile([lambda x: 1.0 + np.abs(x[:, 0])])
    with pytest.raises(AssumptionFailure):
        construct_interval(prof, [0.1], 5.0)


@given(st.floats(0.5, 100), st.floats(0.5, 100), st.integers(0, 2**16))
@settings(max_examples=25, deadline=None)
def test_interval_passes_fresh_membership(a, b, seed):
    prof = isotropic_power(2, 0.5)
    xi = np.array([a, b])
    I = construct_interval(prof, xi, 0.05)
    S = SublevelSet.at(prof, xi)
    assert np.all(S.contains(I.sample(500, seed)))
    assert np.all(I.half_lengths >= 0.05 * prof(xi)[0])


@given(st.integers(1, 2), st.floats(0.5, 1e3))
@settings(max_examples=20, deadline=None)
def test_equal_radial_weights_give_radius_over_root_n(n, r):
    xi = np.zeros(n)
    xi[0] = r
    I = construct_interval(radial_increasing(n), xi, 1e-3)
    np.testing.assert_allclose(I.half_lengths, r / np.sqrt(n), rtol=2e-6)


# ---------------------------------------------------------------- certification


def test_exact_ratio_one_passes_unit_constant():
    cert, est, I = certify_assumptions(radial_increasing(1), [5.0], 0.1, 1.0, samples=20_000, seed=3)
    assert cert.passed and cert.membership_pass_rate == 1.0
    assert cert.ratio == pytest.approx(1.0, abs=3 * cert.ratio_stderr + 1e-12)


def test_disc_over_square_ratio():
    cert, _, _ = certify_assumptions(radial_increasing(2), [2.0, 0.0], 0.1, 2.0, samples=60_000, seed=4)
    assert cert.passed
    assert abs(cert.ratio - np.pi / 2) <= 3 * cert.ratio_stderr


def test_ratio_above_constant_fails():
    cert, _, _ = certify_assumptions(radial_increasing(2), [2.0, 0.0], 0.1, 1.2, samples=60_000, seed=4)
    assert not cert.passed


def test_unbounded_set_cannot_be_certified():
    with pytest.raises(CertificationImpossible):
        certify_assumptions(constant_profile(1), [3.0], 1.0, 10.0, samples=5_000)


def test_threshold_precondition():
    with pytest.raises(PreconditionViolation):
        certify_assumptions(radial_increasing(1), [1.0], 0.1, 10.0, xi_threshold=5.0, samples=5_000)


def test_certificate_serializes():
    cert, _, _ = certify_assumptions(radial_increasing(1), [3.0], 0.1, 2.0, samples=5_000, seed=8)
    rec = json.loads(cert.to_json())
    assert rec["seed"] == 8 and rec["samples"] == 5_000 and rec["passed"] is True
    assert {"box", "ratio", "half_lengths"} <= set(rec)
