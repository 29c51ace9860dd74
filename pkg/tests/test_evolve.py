from __future__ import annotations

import math

import numpy as np
import pytest

from prethermal import evolve
from prethermal.drives import StepSequence, random_rmd, thue_morse_word
from prethermal.errors import CapacityError, ParameterError

SZ = np.diag([1.0, -1.0])


def test_single_site_field():
    D, V = evolve.build_chain(evolve.ChainSpec(L=1, D_terms=(("z", 1.0),), g=0.0))
    np.testing.assert_allclose(D, SZ)
    np.testing.assert_allclose(V, 0.0)


def test_two_site_bond():
    D, _ = evolve.build_chain(evolve.ChainSpec(L=2, D_terms=(("zz", 1.0),)))
    np.testing.assert_allclose(D, np.kron(SZ, SZ))


def test_hermitian_random_strengths():
    rng = np.random.default_rng(3)
    terms = tuple(zip(("zz", "z", "x"), rng.normal(size=3)))
    D, V = evolve.build_chain(evolve.ChainSpec(L=5, D_terms=terms, g=float(rng.normal()), periodic=True))
    assert np.linalg.norm(D - D.conj().T) < 1e-12
    assert np.linalg.norm(V - V.conj().T) < 1e-12


def test_chain_spec_limits():
    with pytest.raises(CapacityError):
        evolve.ChainSpec(L=13)
    with pytest.raises(ParameterError):
        evolve.ChainSpec(L=4, D_terms=(("yy", 1.0),))


def test_propagator_cache_inverse():
    D, V = evolve.build_chain(evolve.ChainSpec(L=4))
    cache = evolve.PropagatorCache(D, V, 0.1)
    back = evolve.PropagatorCache(D, V, -0.1)
    for s in (1.0, -1.0):
        assert np.abs(cache(s) @ back(s) - np.eye(16)).max() < 1e-10


def test_static_chain_conserves_energy():
    spec = evolve.ChainSpec(L=6, g=0.0)
    D, V = evolve.build_chain(spec)
    traj = evolve.evolve_step_drive(D, V, random_rmd(1, 20_000, 0, 0.05), 0.05, evolve.product_state(6), record_every=50, energy_scale=spec.energy_scale)
    assert np.abs(traj.energy_density - traj.energy_density[0]).max() < 1e-10


def test_constant_sign_conserves_energy_of_step_hamiltonian():
    spec = evolve.ChainSpec(L=6, g=0.5)
    D, V = evolve.build_chain(spec)
    seq = StepSequence(np.ones(5000, dtype=int), dt=0.05)
    # With every step equal the Hamiltonian is D + V; track <D + V> directly.
    traj = evolve.evolve_step_drive(D + V, np.zeros_like(V), seq, 0.05, evolve.product_state(6), record_every=100)
    assert np.abs(traj.energy_density - traj.energy_density[0]).max() < 1e-10


def test_short_and_long_runs_agree():
    spec = evolve.ChainSpec(L=5, g=0.7)
    D, V = evolve.build_chain(spec)
    seq = StepSequence(np.repeat([1, -1, 1, -1], [3, 40, 1, 20]), dt=0.07)
    traj = evolve.evolve_step_drive(D, V, seq, 0.07, evolve.product_state(5), record_every=4)
    cache = evolve.PropagatorCache(D, V, 0.07)
    psi = evolve.product_state(5)
    energies = [np.vdot(psi, D @ psi).real / 5]
    for step, s in enumerate(seq.values, start=1):
        psi = cache(s) @ psi
        if step % 4 == 0:
            energies.append(np.vdot(psi, D @ psi).real / 5)
    np.testing.assert_allclose(traj.energy_density, energies, atol=1e-12)


def test_unitarity_long_run():
    spec = evolve.ChainSpec(L=8)
    traj = evolve.run_fixture(random_rmd(2, 100_000, 1, 0.05), spec, record_every=500)
    assert traj.norm_drift < 1e-9
    assert traj.times.size == traj.energy_density.size
    assert np.all(np.abs(traj.energy_density) <= 1.0)


def test_evolve_validation():
    D, V = evolve.build_chain(evolve.ChainSpec(L=2))
    with pytest.raises(ParameterError):
        evolve.evolve_step_drive(D, V, thue_morse_word(2), 0.0, evolve.product_state(2))
    with pytest.raises(ParameterError):
        evolve.evolve_step_drive(D, V, thue_morse_word(2), 0.1, 2 * evolve.product_state(2))


def _traj(values, e_inf):
    values = np.asarray(values, dtype=float)
    return evolve.EnergyTrajectory(np.arange(values.size, dtype=float), values, e_inf, 0.0, 1.0)


def test_heating_time_examples():
    assert math.isinf(evolve.heating_time(_traj([0.5] * 10, 0.0), 0.1))
    values = [-0.8, -0.7, -0.5, -0.3, -0.1, 0.0, 0.0]
    assert evolve.heating_time(_traj(values, 0.0), 0.99) == 5.0
    with pytest.raises(ParameterError):
        evolve.heating_time(_traj(values, 0.0), 1.0)


def test_infinite_temperature_density():
    spec = evolve.ChainSpec(L=4)
    D, _ = evolve.build_chain(spec)
    assert evolve.infinite_temperature_density(D, 4, spec.energy_scale) == pytest.approx(0.0, abs=1e-15)


def test_csv_output():
    text = _traj([0.1, 0.2], 0.0).to_csv()
    assert text.splitlines() == ["t,energy_density", "0,0.10000000000000001", "1,0.20000000000000001"]


def test_rmd_depth_sweep_ordering():
    spec = evolve.ChainSpec(L=8, g=0.5)
    taus = [evolve.heating_time(evolve.run_fixture(random_rmd(r, 1 << 17, 2, 0.05), spec), 0.1) for r in (1, 2, 3)]
    assert taus[0] <= taus[1] <= taus[2]
