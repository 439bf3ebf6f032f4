"""Mean-field flows: terms of the generator, the integrator, conservation."""

import numpy as np
import pytest

from fermiflow.initial_data import (DensityMatrix, fermi_ball_indices,
                                    plane_wave_projection, trapped_slater)
from fermiflow.meanfield import (EvolutionConfig, MeanFieldKind, compare_hf_hartree,
                                 density_profile, direct_term, evolve,
                                 exchange_term, generator, hf_energy, step)
from fermiflow.model import ModelParams, build_potential, kinetic_operator, make_lattice


def harmonic(lat, strength):
    x = lat.sites() - 0.5 * lat.length
    x -= lat.length * np.round(x / lat.length)
    return strength * np.sum(x ** 2, axis=1)


@pytest.fixture
def setup16():
    lat = make_lattice(1, 16, 1.0)
    pot = build_potential({"shape": "gaussian", "strength": 1.0, "sigma": 0.2}, lat)
    params = ModelParams(n_particles=3, ds=1)
    om = plane_wave_projection(lat, fermi_ball_indices(lat, 3))
    return lat, pot, params, om


def test_density_profile_ball_is_flat(setup16):
    lat, _, _, om = setup16
    rho = density_profile(om, lat)
    assert np.allclose(rho, 1.0 / lat.length, atol=1e-12)


def test_density_profile_point_mass():
    lat = make_lattice(1, 8, 1.0)
    m = np.zeros((8, 8), dtype=complex)
    m[0, 0] = 2.0
    rho = density_profile(DensityMatrix(matrix=m, n_particles=2), lat)
    assert rho[0] == pytest.approx(1.0 / lat.spacing)
    assert np.all(rho[1:] == 0.0)
    assert np.sum(rho) * lat.spacing == pytest.approx(1.0)


def test_density_profile_trapped_peaked():
    lat = make_lattice(1, 64, 1.0)
    om = trapped_slater(lat, 0.25, harmonic(lat, 200.0), 4)
    rho = density_profile(om, lat)
    assert 24 <= np.argmax(rho) <= 40  # mass near the trap center
    assert rho[0] < 1e-2 * rho.max()
    assert np.sum(rho) * lat.spacing == pytest.approx(1.0, abs=1e-10)


def test_direct_term_constant_density(setup16):
    lat, pot, _, _ = setup16
    rho = np.full(16, 1.0 / lat.length)
    u = np.diag(direct_term(rho, pot, lat))
    # constant density picks out the zero Fourier mode of V
    expected = pot.fourier.real[np.all(lat.momentum_indices() == 0, axis=1)][0]
    assert np.allclose(u.real, expected, atol=1e-12)


def test_direct_term_zero_potential(setup16):
    lat, _, _, _ = setup16
    v0 = build_potential({"shape": "zero"}, lat)
    assert np.all(direct_term(np.random.default_rng(0).random(16), v0, lat) == 0)


def test_direct_term_point_mass_oracle(setup16):
    lat, pot, _, _ = setup16
    rho = np.zeros(16)
    rho[3] = 1.0
    u = np.real(np.diag(direct_term(rho, pot, lat)))
    x = lat.sites()[:, 0]
    oracle = lat.spacing * np.array(
        [pot.real_space[(j - 3) % 16] for j in range(16)])
    assert np.max(np.abs(u - oracle)) < 1e-12


def test_exchange_zero_potential_and_hermiticity(setup16):
    lat, pot, _, om = setup16
    v0 = build_potential({"shape": "zero"}, lat)
    assert np.all(exchange_term(om, v0, lat) == 0)
    x = exchange_term(om, pot, lat)
    assert np.max(np.abs(x - x.conj().T)) < 1e-12


def test_exchange_cancels_direct_for_single_particle():
    lat = make_lattice(1, 16, 1.0)
    pot = build_potential({"shape": "gaussian", "strength": 1.0, "sigma": 0.2}, lat)
    om = trapped_slater(lat, 1.0, harmonic(lat, 50.0), 1)
    f = np.linalg.eigh(om.matrix)[1][:, -1]
    rho = density_profile(om, lat)
    mismatch = (direct_term(rho, pot, lat) - exchange_term(om, pot, lat)) @ f
    assert np.max(np.abs(mismatch)) < 1e-10


def test_generator_free_and_term_difference(setup16):
    lat, pot, params, om = setup16
    assert np.array_equal(generator(om, MeanFieldKind.FREE, pot, params, lat),
                          kinetic_operator(lat, params.hbar))
    h_hf = generator(om, MeanFieldKind.HARTREE_FOCK, pot, params, lat)
    h_h = generator(om, MeanFieldKind.HARTREE, pot, params, lat)
    assert np.max(np.abs((h_h - h_hf) - exchange_term(om, pot, lat))) < 1e-12


def test_step_preserves_spectrum(setup16):
    lat, pot, params, om = setup16
    cfg = EvolutionConfig(dt=1e-2, t_final=1e-2)
    new = step(om, cfg, MeanFieldKind.HARTREE_FOCK, pot, params, lat)
    assert np.allclose(np.linalg.eigvalsh(new.matrix),
                       np.linalg.eigvalsh(om.matrix), atol=1e-10)


def test_step_free_is_exact_conjugation():
    lat = make_lattice(1, 16, 1.0)
    pot = build_potential({"shape": "zero"}, lat)
    params = ModelParams(n_particles=2, ds=1)
    om = trapped_slater(lat, params.hbar, harmonic(lat, 20.0), 2)
    cfg = EvolutionConfig(dt=0.3, t_final=0.3)
    new = step(om, cfg, MeanFieldKind.FREE, pot, params, lat)
    h = kinetic_operator(lat, params.hbar)
    eig, vec = np.linalg.eigh(h)
    u = (vec * np.exp(-1j * cfg.dt * eig / params.hbar)) @ vec.conj().T
    ref = u @ om.matrix @ u.conj().T
    assert np.max(np.abs(new.matrix - ref)) < 1e-12


def test_step_local_error_is_third_order():
    # Richardson: one step of size dt vs dt/2 against a dt/100 reference;
    # a second-order scheme has local error O(dt^3), ratio ~ 8
    lat = make_lattice(1, 16, 1.0)
    pot = build_potential({"shape": "gaussian", "strength": 1.0, "sigma": 0.2}, lat)
    params = ModelParams(n_particles=2, ds=1)
    om = trapped_slater(lat, params.hbar, harmonic(lat, 50.0), 2)
    dt = 2e-2

    def advance(state, h_step, n):
        cfg = EvolutionConfig(dt=h_step, t_final=h_step)
        for _ in range(n):
            state = step(state, cfg, MeanFieldKind.HARTREE_FOCK, pot, params, lat)
        return state

    def one_step_error(h_step):
        ref = advance(om, h_step / 100, 100).matrix
        return np.linalg.norm(advance(om, h_step, 1).matrix - ref, "fro")

    ratio = one_step_error(dt) / one_step_error(dt / 2)
    assert 6.0 < ratio < 10.0


def test_evolve_free_ball_is_stationary(setup16):
    lat, _, params, om = setup16
    v0 = build_potential({"shape": "zero"}, lat)
    cfg = EvolutionConfig(dt=1e-2, t_final=1.0, snapshot_stride=100)
    traj = evolve(om, cfg, MeanFieldKind.FREE, v0, params, lat)
    assert np.max(np.abs(traj.states[-1].matrix - om.matrix)) < 1e-10


def test_evolve_trace_stability(setup16):
    lat, pot, params, om = setup16
    cfg = EvolutionConfig(dt=1e-3, t_final=1.0, snapshot_stride=1000)
    traj = evolve(om, cfg, MeanFieldKind.HARTREE_FOCK, pot, params, lat)
    assert max(abs(tr - 3.0) for tr in traj.trace) < 1e-9
    assert len(traj.step_times) == 1001


def test_hf_energy_examples():
    lat = make_lattice(1, 8, 1.0)
    v0 = build_potential({"shape": "zero"}, lat)
    params = ModelParams(n_particles=3, ds=1, hbar=0.4)
    om = plane_wave_projection(lat, np.array([[-1], [0], [1]]))
    e = hf_energy(om, v0, params, lat)
    assert e == pytest.approx(2 * params.hbar ** 2 * (2 * np.pi) ** 2, rel=1e-12)
    zero = DensityMatrix(matrix=np.zeros((8, 8), dtype=complex), n_particles=3)
    assert hf_energy(zero, v0, params, lat) == 0.0


def test_hf_energy_conserved_along_flow():
    lat = make_lattice(1, 32, 1.0)
    pot = build_potential({"shape": "gaussian", "strength": 1.0, "sigma": 0.2}, lat)
    params = ModelParams(n_particles=4, ds=1)
    om = trapped_slater(lat, params.hbar, harmonic(lat, 50.0), 4)
    drifts = []
    for dt in (2e-3, 1e-3):
        cfg = EvolutionConfig(dt=dt, t_final=0.2, snapshot_stride=1000)
        traj = evolve(om, cfg, MeanFieldKind.HARTREE_FOCK, pot, params, lat)
        e0 = traj.energy[0]
        drifts.append(max(abs(e - e0) for e in traj.energy) / abs(e0))
    assert drifts[1] < 1e-6
    # the drift is an integrator artifact converging to zero at order dt^2
    assert drifts[0] / drifts[1] > 3.0


def test_compare_hf_hartree_degenerate_cases():
    lat = make_lattice(1, 16, 1.0)
    params = ModelParams(n_particles=3, ds=1)
    om = plane_wave_projection(lat, fermi_ball_indices(lat, 3))
    v0 = build_potential({"shape": "zero"}, lat)
    cfg = EvolutionConfig(dt=1e-2, t_final=0.1, snapshot_stride=5)
    times, gaps = compare_hf_hartree(om, cfg, v0, params, lat)
    assert gaps[0] == 0.0
    assert np.max(gaps) < 1e-10  # V = 0: the two flows coincide
