import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cptwell import analytic, master
from cptwell.errors import ConfigError, ShapeError, StateCorruptionError
from cptwell.master import DecayParams, DensityMatrixPrimed
from cptwell.tdse import TimeGrid


def random_state(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def test_gamma_zero_reproduces_unitary(working_params):
    init = np.array([0.6, 0.8j, 0.0])
    dec = DecayParams.from_params(working_params, gamma=0.0)
    tr = master.evolve_master(DensityMatrixPrimed.from_amplitudes(init), working_params, dec,
                              TimeGrid(tau_end=400 * math.pi), stop_at_steady=False)
    exact = analytic.primed_amplitudes(working_params, init, tr.taus).populations.T
    assert np.max(np.abs(tr.populations - exact)) < 1e-6


def test_gamma_zero_coherences(working_params):
    init = np.array([0.0, 0.6, 0.8])
    dec = DecayParams.from_params(working_params, gamma=0.0)
    tr = master.evolve_master(DensityMatrixPrimed.from_amplitudes(init), working_params, dec,
                              TimeGrid(tau_end=200), stop_at_steady=False)
    c = np.array(analytic.primed_amplitudes(working_params, init, tr.taus)).T
    assert np.max(np.abs(tr.rho - c[:, :, None] * c[:, None, :].conj())) < 1e-6


def test_dark_state_is_stationary(working_params):
    dec = DecayParams.from_params(working_params)
    d = master.master_rhs(DensityMatrixPrimed.pure(0), working_params, dec)
    assert np.all(d == 0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0, 0.1), nonsecular=st.booleans())
def test_rhs_preserves_trace_and_hermiticity(working_params, seed, gamma, nonsecular):
    rho = random_state(seed)
    dec = DecayParams.from_params(working_params, gamma)
    d = master.master_rhs(rho, working_params, dec, nonsecular=nonsecular)
    assert abs(np.trace(d)) < 1e-14
    assert np.max(np.abs(d - d.conj().T)) < 1e-14


def test_liouvillian_matches_rhs(working_params):
    dec = DecayParams.from_params(working_params)
    lv = master.liouvillian(working_params, dec)
    for seed in range(5):
        rho = random_state(seed)
        assert lv @ rho.ravel() == pytest.approx(master.master_rhs(rho, working_params, dec).ravel(), abs=1e-15)


@pytest.mark.parametrize("init", [0, 1, 2])
def test_steady_state_is_ground(working_params, init):
    dec = DecayParams.from_params(working_params)
    tr = master.evolve_master(DensityMatrixPrimed.pure(init), working_params, dec, TimeGrid(tau_end=5000))
    assert tr.populations[-1, 0] >= 0.999
    assert tr.trace_drift < 1e-8
    assert tr.min_eigenvalue > -1e-6


def test_mixed_initial_state(working_params):
    dec = DecayParams.from_params(working_params)
    tr = master.evolve_master(DensityMatrixPrimed(random_state(7)), working_params, dec,
                              TimeGrid(tau_end=5000))
    assert np.allclose(np.trace(tr.rho, axis1=1, axis2=2), 1, atol=1e-8)
    # the dark-state population is conserved by the coherent part and only fed by decay
    assert np.all(np.diff(tr.populations[:, 0]) >= -1e-12)


def test_steady_detection_and_horizon(working_params):
    dec = DecayParams.from_params(working_params)
    short = master.evolve_master(DensityMatrixPrimed.pure(1), working_params, dec, TimeGrid(tau_end=50))
    assert short.steady_tau is None and short.final_rate > 1e-10
    done = master.evolve_master(DensityMatrixPrimed.pure(0), working_params, dec, TimeGrid(tau_end=50))
    assert done.steady_tau == pytest.approx(done.taus[1])
    assert len(done.taus) == 2


def test_lab_populations_without_field(working_params):
    p = analytic.ThreeLevelParams(**{**working_params.__dict__, "phi_amplitude": 0.0})
    rho = np.array([random_state(s) for s in range(4)])
    taus = np.linspace(0, 3, 4)
    lab = master.lab_populations_from_primed(rho, p, taus)
    assert lab == pytest.approx(rho.diagonal(axis1=1, axis2=2).real, abs=1e-15)


def test_lab_populations_of_excited_primed(working_params):
    taus = np.linspace(0, 2 * math.pi, 50)
    rho = np.repeat(DensityMatrixPrimed.pure(0).rho[None], 50, axis=0)
    lab = master.lab_populations_from_primed(rho, working_params, taus)
    phi = analytic.frame_angle(working_params, taus)
    assert lab[:, 1] == pytest.approx(np.sin(phi) ** 2, abs=1e-15)


def test_lab_populations_match_amplitude_route(working_params):
    init = (0.6, 0.8j, 0.0)
    taus = np.linspace(0, 40, 81)
    primed = analytic.primed_amplitudes(working_params, init, taus)
    c = np.array(primed).T
    rho = c[:, :, None] * c[:, None, :].conj()
    lab = master.lab_populations_from_primed(rho, working_params, taus)
    direct = analytic.lab_amplitudes(primed, taus, working_params).populations.T
    assert lab == pytest.approx(direct, abs=1e-12)


def test_lab_populations_shape_errors(working_params):
    with pytest.raises(ShapeError):
        master.lab_populations_from_primed(np.zeros((3, 3, 3)), working_params, np.zeros(2))
    with pytest.raises(ShapeError):
        master.lab_populations_from_primed(np.zeros((2, 2, 2)), working_params, np.zeros(2))


def _slowest_rate(p, gamma):
    ev = np.linalg.eigvals(master.liouvillian(p, DecayParams.from_params(p, gamma)))
    nonzero = ev.real[ev.real < -1e-12]
    return -nonzero.max()


def test_rate_scales_with_gamma(working_params):
    ratio = _slowest_rate(working_params, 0.002) / _slowest_rate(working_params, 0.001)
    assert 1.5 <= ratio <= 2.5


def test_fitted_rate_matches_spectrum(working_params):
    gamma = 0.001
    dec = DecayParams.from_params(working_params, gamma)
    tr = master.evolve_master(DensityMatrixPrimed.pure(1), working_params, dec,
                              TimeGrid(tau_end=30000), stop_at_steady=False, stride=200)
    fitted = master.approach_rate(tr.taus, tr.populations[:, 0])
    assert fitted == pytest.approx(_slowest_rate(working_params, gamma), rel=0.05)


def test_fluorescence(working_params):
    assert master.fluorescence([0.0, 0.5], 0.01) == pytest.approx([0.0, 0.005])


def test_printed_rabi_changes_dynamics(working_params):
    dec = DecayParams.from_params(working_params, 0.0)
    rho = DensityMatrixPrimed.pure(1)
    a = master.master_rhs(rho, working_params, dec)
    b = master.master_rhs(rho, working_params, dec, printed_rabi=True)
    assert a[1, 2] == pytest.approx(-0.5j * working_params.Omega23R / working_params.omega_L)
    assert b[1, 2] == pytest.approx(2 * a[1, 2])
    rho = DensityMatrixPrimed.from_amplitudes([0, 0.6, 0.8])
    a = master.master_rhs(rho, working_params, dec)
    b = master.master_rhs(rho, working_params, dec, printed_rabi=True)
    assert b[1, 1] == pytest.approx(2 * a[1, 1])


def test_nonsecular_terms_couple_conjugates(working_params):
    dec = DecayParams.from_params(working_params)
    rho = random_state(3)
    full = master.master_rhs(rho, working_params, dec)
    secular = master.master_rhs(rho, working_params, dec, nonsecular=False)
    diff = full - secular
    assert diff[1, 2] == pytest.approx(0.25 * dec.gamma * dec.Lambda2 * rho[2, 1])
    assert np.allclose(diff.diagonal(), 0)


def test_positivity_monitor_warns(working_params, caplog):
    dec = DecayParams.from_params(working_params)
    bad = np.diag([1.0 + 1e-9, 0.0, -1e-9]).astype(complex)
    bad[1, 2] = bad[2, 1] = 0.01
    with caplog.at_level(logging.WARNING, logger="cptwell.master"):
        master.evolve_master(DensityMatrixPrimed(bad), working_params, dec, TimeGrid(tau_end=1.0))
    assert "positivity" in caplog.text


def test_corrupt_states_rejected(working_params):
    with pytest.raises(StateCorruptionError):
        DensityMatrixPrimed(np.diag([0.5, 0.4, 0.0]))
    with pytest.raises(StateCorruptionError):
        DensityMatrixPrimed(np.array([[1, 0.1, 0], [0, 0, 0], [0, 0, 0]]))
    with pytest.raises(ShapeError):
        DensityMatrixPrimed(np.eye(2))
    with pytest.raises(ConfigError):
        DecayParams(gamma=-1)
    with pytest.raises(ConfigError):
        master.evolve_master(DensityMatrixPrimed.pure(0), working_params, DecayParams(), TimeGrid(tau_end=1), stride=0)
