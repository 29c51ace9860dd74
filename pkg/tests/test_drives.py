from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from prethermal.drives import (
    ExpAlpha,
    PolyAlpha,
    PolyB,
    QuasipolyB,
    StepSequence,
    StretchB,
    drive_from_csv,
    drive_to_csv,
    factorial_drive,
    fibonacci_length,
    fibonacci_word,
    quasi_floquet_drive,
    random_rmd,
    rmd_sequence,
    sample,
    sequence_from_text,
    sequence_to_text,
    thue_morse_word,
)
from prethermal.errors import CapacityError, ParameterError


@pytest.mark.parametrize(
    "depth, expected",
    [(0, [1]), (1, [1, -1]), (3, [1, -1, -1, 1, -1, 1, 1, -1])],
)
def test_thue_morse_examples(depth, expected):
    assert thue_morse_word(depth).values.tolist() == expected


def test_thue_morse_zero_mean_and_length():
    for r in range(1, 12):
        seq = thue_morse_word(r)
        assert len(seq) == 2**r
        assert seq.values.sum() == 0


def test_thue_morse_self_similarity():
    for r in range(1, 10):
        v = thue_morse_word(r).values
        prev = thue_morse_word(r - 1).values
        np.testing.assert_array_equal(v[0::2], prev)
        np.testing.assert_array_equal(v[1::2], -prev)


def test_thue_morse_cap():
    thue_morse_word(24)
    with pytest.raises(CapacityError):
        thue_morse_word(1000)


@pytest.mark.parametrize(
    "r, signs, expected",
    [
        (2, [1], [1, -1, -1, 1]),
        (2, [1, -1], [1, -1, -1, 1, -1, 1, 1, -1]),
        (0, [-1, -1], [-1, -1]),
    ],
)
def test_rmd_examples(r, signs, expected):
    assert rmd_sequence(r, signs).values.tolist() == expected


def test_rmd_single_block_is_thue_morse():
    for r in range(6):
        np.testing.assert_array_equal(rmd_sequence(r, [1]).values, thue_morse_word(r).values)


def test_rmd_requires_blocks():
    with pytest.raises(ParameterError):
        rmd_sequence(2, [])


def test_random_rmd_is_reproducible():
    a = random_rmd(3, 1 << 10, seed=5)
    b = random_rmd(3, 1 << 10, seed=5)
    np.testing.assert_array_equal(a.values, b.values)
    assert len(a) == 1 << 10
    assert a.random_signed


@pytest.mark.parametrize("n, expected", [(0, [1]), (2, [1, -1, 1]), (3, [1, -1, 1, 1, -1])])
def test_fibonacci_examples(n, expected):
    assert fibonacci_word(n).values.tolist() == expected


def test_fibonacci_lengths_follow_recurrence():
    lengths = [len(fibonacci_word(n)) for n in range(15)]
    for n in range(1, 14):
        assert lengths[n + 1] == lengths[n] + lengths[n - 1]
    assert fibonacci_length(20) == 17711 == len(fibonacci_word(20))


def test_step_sequence_rejects_other_values():
    with pytest.raises(ParameterError):
        StepSequence(np.array([1, 0, -1]))


def test_factorial_drive_examples():
    d = factorial_drive(PolyB(2), 1, 1.0)
    assert d.freqs.tolist() == [1.0] and d.amps.tolist() == [1.0]
    d = factorial_drive(PolyB(2), 3, 1.0)
    np.testing.assert_allclose(d.amps, [1, 1 / 4, 1 / 36])
    np.testing.assert_allclose(d.freqs, [1, 1 / 2, 1 / 6])
    d = factorial_drive(StretchB(1), 2, 1.0)
    np.testing.assert_allclose(d.amps, [math.exp(-1), math.exp(-2)])
    np.testing.assert_allclose(d.freqs, [1, 1 / 2])


@pytest.mark.parametrize("law", [PolyB(1.5), QuasipolyB(2.0), StretchB(0.5)])
def test_factorial_amplitudes_decrease(law):
    amps = factorial_drive(law, 6, 2.0).amps
    assert np.all(np.diff(amps) < 0)


def test_factorial_drive_rejects_bad_b():
    with pytest.raises(ParameterError):
        factorial_drive(PolyB(1.0), 3, 1.0)


def test_quasi_floquet_two_tone():
    phi = (math.sqrt(5) - 1) / 2
    d = quasi_floquet_drive((1.0, phi), ExpAlpha(50.0), 1)
    np.testing.assert_allclose(sorted(np.abs(d.freqs)), [phi, 1.0])


def test_quasi_floquet_single_tone():
    d = quasi_floquet_drive((1.0,), PolyAlpha(1.0), 2)
    np.testing.assert_allclose(d.amps, [1.0, 0.5])
    np.testing.assert_allclose(d.freqs, [1.0, 2.0])


def test_quasi_floquet_l1_cutoff():
    d = quasi_floquet_drive((1.0, math.sqrt(2)), ExpAlpha(1.0), 1)
    np.testing.assert_allclose(sorted(np.abs(d.freqs)), [1.0, math.sqrt(2)])
    np.testing.assert_allclose(d.amps, math.exp(-1))


def test_sample_examples():
    d = factorial_drive(PolyB(2), 2, 1.0)
    assert sample(d, [0.0])[0] == 0.0
    assert sample(d, [math.pi])[0] == pytest.approx(0.25)


def test_serialization_round_trip():
    seq = thue_morse_word(5)
    back = sequence_from_text(sequence_to_text(seq))
    np.testing.assert_array_equal(back.values, seq.values)
    d = factorial_drive(PolyB(2), 4, 3.0)
    text = drive_to_csv(d)
    assert text.splitlines()[0] == "label,freq,amp,phase"
    d2 = drive_from_csv(text, lam=3.0)
    np.testing.assert_allclose(d2.freqs, d.freqs)
    np.testing.assert_allclose(d2.amps, d.amps)


@given(st.integers(0, 12))
def test_thue_morse_entries_are_signs(depth):
    v = thue_morse_word(depth).values
    assert set(np.unique(v).tolist()) <= {-1, 1}
