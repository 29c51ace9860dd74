from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prethermal import spectra
from prethermal.arithmetic import Poly, Quasipoly, StretchExpt
from prethermal.drives import fibonacci_word, random_rmd, rmd_sequence, thue_morse_word
from prethermal.errors import EmptyEnvelopeError, FitError, ParameterError


def test_dft_two_point():
    spec = spectra.dft(np.array([1.0, -1.0]), subtract_mean=False)
    assert spec.omega.tolist() == [math.pi]
    assert spec.values[0] == pytest.approx(1.0)


def test_dft_constant_after_mean_subtraction():
    spec = spectra.dft(np.ones(4), subtract_mean=True)
    np.testing.assert_allclose(spec.values, 0.0, atol=1e-15)


def test_dft_rejects_short_input():
    with pytest.raises(ParameterError):
        spectra.dft(np.array([1.0]))


def test_dft_matches_direct_sum_at_odd_length():
    seq = fibonacci_word(9)
    spec = spectra.dft(seq)
    x = seq.as_float() - seq.as_float().mean()
    np.testing.assert_allclose(spec.values, spectra.dft_direct(x, spec.omega), atol=1e-12)


@pytest.mark.parametrize("seq", [thue_morse_word(10), fibonacci_word(15), random_rmd(2, 1 << 12, 3)])
def test_parseval(seq):
    spec = spectra.dft(seq)
    x = seq.as_float() - seq.as_float().mean()
    lhs = np.sum(np.abs(spec.values) ** 2) * spec.n
    assert lhs == pytest.approx(np.sum(x**2), rel=1e-9)


def test_riesz_product_examples():
    assert spectra.riesz_product(1, math.pi) == pytest.approx(2.0)
    assert abs(spectra.riesz_product(2, math.pi)) < 1e-15
    assert spectra.riesz_product(1, 0.0) == 0


def test_riesz_bound_examples():
    assert spectra.riesz_bound(1, 0.1) == pytest.approx(0.1)
    assert spectra.riesz_bound(3, 0.1) == pytest.approx(0.008)
    assert spectra.riesz_bound(2, 1.0) == pytest.approx(2.0)


@pytest.mark.parametrize("r", [2, 5, 8])
def test_riesz_identity_small_depths(r):
    spec = spectra.dft(thue_morse_word(r), subtract_mean=False)
    np.testing.assert_allclose(2**r * spec.values, spectra.riesz_product(r, spec.omega), atol=1e-11)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.floats(1e-6, math.pi))
def test_riesz_bound_property(r, omega):
    assert abs(spectra.riesz_product(r, omega)) <= spectra.riesz_bound(r, omega) * (1 + 1e-12)


def test_rmd_factorization():
    r = 3
    signs = [1, -1, -1, 1, 1, 1, -1, 1]
    seq = rmd_sequence(r, signs)
    spec = spectra.dft(seq, subtract_mean=False)
    expected = np.abs(spectra.riesz_product(r, spec.omega)) * np.abs(spectra.block_sign_transform(signs, r, spec.omega)) / spec.n
    np.testing.assert_allclose(np.abs(spec.values), expected, atol=1e-12)


def test_envelope_single_entry():
    spec = spectra.Spectrum(np.array([0.1]), np.array([0.5]), n=2)
    env = spectra.binned_median_envelope(spec, 1.0, 4)
    assert env.magnitude.tolist() == [0.5]


def test_envelope_even_count_median():
    spec = spectra.Spectrum(np.array([0.1, 0.11]), np.array([1.0, 3.0]), n=3)
    env = spectra.binned_median_envelope(spec, 1.0, 4)
    assert env.magnitude.tolist() == [2.0]
    assert env.omega[0] == pytest.approx(math.sqrt(env.edges[0] * env.edges[1]))


def test_envelope_errors():
    spec = spectra.Spectrum(np.array([2.0]), np.array([1.0]), n=2)
    with pytest.raises(EmptyEnvelopeError):
        spectra.binned_median_envelope(spec, 1.0, 4)
    with pytest.raises(ParameterError):
        spectra.binned_median_envelope(spec, 1.0, 3)


def test_fibonacci_envelope_increases():
    env = spectra.binned_median_envelope(spectra.dft(fibonacci_word(20)))
    fit = spectra.fit_power_law(env)
    assert fit.slope > 0.85


def test_power_law_exact():
    om = np.geomspace(1e-3, 0.3, 20)
    slope, intercept, rms = spectra.fit_power_law(spectra.envelope_from_points(om, om**2))
    assert slope == pytest.approx(2.0) and rms < 1e-12
    slope, intercept, rms = spectra.fit_power_law(spectra.envelope_from_points(om, 3 * om))
    assert slope == pytest.approx(1.0) and intercept == pytest.approx(math.log(3))


def test_power_law_needs_three_points():
    with pytest.raises(FitError):
        spectra.fit_power_law(spectra.envelope_from_points([0.1, 0.2, 0.3], [1.0, 0.0, 2.0]))


def test_class_fit_quasipoly_synthetic():
    om = np.geomspace(1e-4, 0.3, 30)
    fit = spectra.fit_suppression_class(spectra.envelope_from_points(om, np.exp(-np.log(1 / om) ** 2)), Quasipoly(2.0))
    assert fit.b_hat == pytest.approx(2.0, abs=0.05)


def test_class_fit_stretch_synthetic():
    om = np.geomspace(0.02, 0.4, 30)
    fit = spectra.fit_suppression_class(spectra.envelope_from_points(om, np.exp(-1 / om)), StretchExpt(1.0))
    assert fit.b_hat == pytest.approx(1.0, abs=0.05)


def test_csv_round_trip():
    spec = spectra.dft(thue_morse_word(6))
    back = spectra.spectrum_from_csv(spectra.spectrum_to_csv(spec))
    np.testing.assert_allclose(back.values, spec.values, atol=1e-15)
    env = spectra.binned_median_envelope(spec)
    text = spectra.envelope_to_csv(env)
    assert text.startswith("omega,median_mag\n")
    np.testing.assert_allclose(spectra.envelope_from_csv(text).magnitude, env.magnitude)
