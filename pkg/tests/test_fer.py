from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from prethermal import fer
from prethermal.drives import StepSequence, random_rmd, thue_morse_word
from prethermal.errors import BranchError, ParameterError, PreconditionError
from prethermal.fer import Su2Operator
from prethermal.spectra import dft


def test_su2_operator_algebra():
    a = Su2Operator(1.0, 0.0, 3.0, 4.0)
    assert a.norm() == pytest.approx(6.0)
    assert np.linalg.norm(a.matrix(), 2) == pytest.approx(6.0)
    assert Su2Operator.from_matrix(a.matrix()) == a
    assert (a + a - a) == a and 2 * a == a * 2.0


def test_step_hamiltonians_examples():
    s = fer.step_hamiltonians(StepSequence(np.array([1, -1])), 1.0, 0.5)
    assert s.D == Su2Operator(0, 0, 0, 1)
    np.testing.assert_allclose(s.V, [[0, 0.5, 0, 0], [0, -0.5, 0, 0]])
    s = fer.step_hamiltonians(StepSequence(np.array([1])), 1.0, 1.0)
    assert s.D == Su2Operator(0, 1, 0, 1)
    np.testing.assert_allclose(s.V, 0.0)
    s = fer.step_hamiltonians(thue_morse_word(5), 1.0, 0.0)
    np.testing.assert_allclose(s.V, 0.0)


def test_generator_examples():
    s = fer.step_hamiltonians(StepSequence(np.array([1, -1]), dt=0.1), 1.0, 0.5)
    G = fer.solve_generator(s)
    np.testing.assert_allclose(G[0], 0.0)
    # A_1 = -i dt V_0, stored as A = i G.
    np.testing.assert_allclose(G[1], -0.1 * s.V[0])
    zero = fer.step_hamiltonians(thue_morse_word(4), 1.0, 0.0)
    np.testing.assert_allclose(fer.solve_generator(zero), 0.0)


def test_generator_frequency_relation():
    dt = 0.05
    s = fer.step_hamiltonians(thue_morse_word(3, dt), 1.0, 0.3)
    A = 1j * fer.solve_generator(s)[:, 1]
    spec_a = dft(A, subtract_mean=False)
    spec_v = dft(s.V[:, 1], subtract_mean=False)
    expected = -1j * dt * spec_v.values / (np.exp(1j * spec_v.omega) - 1.0)
    np.testing.assert_allclose(spec_a.values, expected, atol=1e-10)


def test_generator_requires_zero_mean():
    s = fer.step_hamiltonians(thue_morse_word(3), 1.0, 0.3)
    bad = fer.FerState(0, s.D, s.V + np.array([0, 0.1, 0, 0]), s.dt)
    with pytest.raises(PreconditionError):
        fer.solve_generator(bad)


def test_principal_log_examples():
    assert fer.principal_log_su2(np.eye(2)) == Su2Operator()
    U = expm(-1j * 0.3 * fer.PAULI[3])
    np.testing.assert_allclose(fer.principal_log_su2(U).to_array(), [0, 0, 0, 0.3], atol=1e-14)


def test_principal_log_branch_and_unitarity():
    with pytest.raises(BranchError):
        fer.principal_log_su2(-np.eye(2))
    with pytest.raises(ParameterError):
        fer.principal_log_su2(np.array([[1.0, 0.1], [0.0, 1.0]]))


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-0.9 * math.pi / 2, 0.9 * math.pi / 2),
    st.floats(0.0, 0.9 * math.pi / 2),
    st.floats(0, math.pi),
    st.floats(0, 2 * math.pi),
)
def test_principal_log_round_trip(c0, radius, theta, phi):
    # Eigenphases -(c0 +- radius) stay inside 0.9 pi.
    n = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    H = Su2Operator(c0, *(radius * n))
    U = expm(-1j * H.matrix())
    back = fer.principal_log_su2(U)
    np.testing.assert_allclose(expm(-1j * back.matrix()), U, atol=1e-10)


def test_fer_iterate_fixed_point():
    s = fer.step_hamiltonians(thue_morse_word(5, 0.05), 1.0, 0.0)
    nxt = fer.fer_iterate(s)
    assert nxt.q == 1
    np.testing.assert_allclose(nxt.H, s.H, atol=1e-13)


def test_first_dressed_drive_along_y():
    s = fer.step_hamiltonians(thue_morse_word(8, 0.05), 1.0, 0.1)
    V1 = fer.fer_iterate(s).V
    assert np.all(np.abs(V1[:, 2]) >= 3 * np.maximum(np.abs(V1[:, 1]), np.abs(V1[:, 3])))


def test_first_order_diagnostic_tracks_exact():
    s = fer.step_hamiltonians(random_rmd(3, 1 << 10, 4, 0.05), 1.0, 0.05)
    exact = fer.fer_iterate(s).H
    approx = fer.dressed_first_order(s)
    leading = np.abs(exact - s.D.to_array()).max()
    assert np.abs(exact - approx).max() < 0.05 * leading


@pytest.mark.parametrize("seq", [thue_morse_word(9, 0.05), random_rmd(2, 1 << 9, 1, 0.1)])
def test_frame_change_exact(seq):
    s = fer.step_hamiltonians(seq, 1.0, 0.2)
    for _ in range(3):
        nxt = fer.fer_iterate(s)
        assert fer.frame_change_residual(s, nxt) < 1e-9
        s = nxt


def test_branch_guard():
    s = fer.step_hamiltonians(thue_morse_word(3, 1.0), 3.0, 0.5)
    with pytest.raises(BranchError):
        fer.fer_iterate(s)


def test_dressed_spectrum_q0_matches_drive():
    g = 0.3
    seq = thue_morse_word(8, 0.05)
    s = fer.step_hamiltonians(seq, 1.0, g)
    spec = fer.dressed_spectrum(s, "x")
    np.testing.assert_allclose(spec.values, g * dft(seq).values, atol=1e-14)
    with pytest.raises(ParameterError):
        fer.dressed_spectrum(s, "w")


def test_plot_component():
    assert [fer.plot_component(q) for q in range(4)] == ["x", "y", "x", "y"]


@pytest.mark.parametrize("r", [2, 3, 4])
def test_suppression_loss_per_order(r):
    states = fer.fer_sequence(fer.step_hamiltonians(random_rmd(r, 1 << 14, 0, 0.05), 1.0, 0.05), min(r - 1, 2))
    slopes = [fer.dressed_slope(s)[0].slope for s in states]
    norms = [s.max_V_norm() for s in states]
    for a, b in zip(slopes, slopes[1:]):
        assert a - b == pytest.approx(1.0, abs=0.4)
    for a, b in zip(norms, norms[1:]):
        assert b <= 0.5 * a


D0 = Su2Operator(0, 0, 0, 1.0)
V0 = Su2Operator(0, 0.5, 0, 0)
DT_FIT = np.geomspace(1e-3, 1e-2, 12)


def test_mori_magnus_leading_term_is_D():
    table = fer.mori_magnus_terms(D0, V0, 4, 2, DT_FIT)
    for r in range(1, 5):
        np.testing.assert_allclose(table.h[r][0].to_array(), D0.to_array(), atol=1e-8)


def test_mori_magnus_r3_m1():
    table = fer.mori_magnus_terms(D0, V0, 3, 1, DT_FIT)
    expected = 2.0**-2 * (0.5 * (table.base_plus[1] + table.base_minus[1]))
    assert table.h[3][1] == expected
    plus, minus = fer.mori_magnus_direct(D0, V0, 3, 1, DT_FIT)
    np.testing.assert_allclose(table.h[3][1].to_array(), plus[1].to_array(), atol=1e-6)
    np.testing.assert_allclose(table.h[3][1].to_array(), minus[1].to_array(), atol=1e-6)


def test_mori_magnus_static():
    table = fer.mori_magnus_terms(D0, Su2Operator(), 4, 2, DT_FIT)
    for r in range(2, 5):
        for m in range(1, min(2, r - 1) + 1):
            np.testing.assert_allclose(table.h[r][m].to_array(), 0.0, atol=1e-8)


def test_mori_magnus_validation():
    with pytest.raises(ParameterError):
        fer.mori_magnus_terms(D0, V0, 4, 4, DT_FIT)
    with pytest.raises(ParameterError):
        fer.mori_magnus_terms(D0, V0, 4, 2, np.linspace(1e-3, 2e-3, 8))
    with pytest.raises(ParameterError):
        fer.mori_magnus_terms(D0, V0, 4, 2, DT_FIT[:3])
