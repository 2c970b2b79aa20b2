import math

import numpy as np
import pytest

from localtimes import (ConvergenceError, LocalTimeWarning, ParameterError, StateVector, evolve, random_hermitian, random_state,
        spectral_decompose)
from localtimes.ltsmap import (InvarianceReport, TimeWindow, invariance_report, sample_local_time, sigma_map, tau_min,
        window_characteristic, window_overlap)

def test_window_defaults():
    w = TimeWindow(1.0, 0.3)
    assert w.sigma == pytest.approx(0.1)
    assert (w.lower, w.upper) == pytest.approx((0.7, 1.3))
    with pytest.raises(ParameterError):
        TimeWindow(1.0, 0.0)
    with pytest.raises(ParameterError):
        TimeWindow(-1.0, 0.1)

def test_coherence_is_damped_by_window(qubit_hamiltonian, plus):
    window = TimeWindow(1.0, 0.3)
    sigma = sigma_map(plus, qubit_hamiltonian, window)
    assert np.real(np.diag(sigma.matrix)) == pytest.approx([0.5, 0.5], abs=1e-12)
    expected = 0.5 * abs(window_characteristic(window, 1.0))
    assert abs(sigma.matrix[0, 1]) == pytest.approx(expected, abs=1e-10)
    assert abs(sigma.matrix[0, 1]) < 0.5

def test_characteristic_phase(qubit_hamiltonian):
    window = TimeWindow(2.0, 0.4, 0.2)
    value = window_characteristic(window, 0.7)
    assert np.angle(value) == pytest.approx(math.remainder(-0.7 * 2.0, 2 * math.pi))
    assert abs(window_characteristic(window, 0.0) - 1) < 1e-12

def test_invariances(rng):
    H = spectral_decompose(random_hermitian(rng, 4))
    psi = random_state(rng, (4,))
    report = invariance_report(psi, H, TimeWindow(1.5, 0.2), beta=0.7)
    assert isinstance(report, InvarianceReport)
    assert report.worst() <= 1e-10

def test_density_and_vector_inputs_agree(rng):
    H = spectral_decompose(random_hermitian(rng, 3))
    psi = random_state(rng, (3,))
    window = TimeWindow(1.0, 0.1)
    assert np.allclose(sigma_map(psi, H, window).matrix, sigma_map(psi.density(), H, window).matrix, atol=1e-12)

def test_quadrature_must_converge():
    H = spectral_decompose(np.diag([0.0, 50.0]))
    psi = StateVector.normalized(np.array([1, 1]), (2,))
    with pytest.raises(ConvergenceError):
        sigma_map(psi, H, TimeWindow(2.0, 1.0, 1.0), n_nodes=2)

def test_tau_min_qubit(qubit_hamiltonian, plus):
    assert tau_min(qubit_hamiltonian, plus) == pytest.approx(math.pi)

def test_tau_min_degenerate_cases(qubit_hamiltonian):
    ground = StateVector(np.array([0, 1]), (2,))
    excited = StateVector(np.array([1, 0]), (2,))
    with pytest.raises(ParameterError):
        tau_min(qubit_hamiltonian, ground)
    with pytest.warns(LocalTimeWarning):
        assert math.isinf(tau_min(qubit_hamiltonian, excited))

def test_window_overlap(qubit_hamiltonian, plus):
    assert window_overlap(plus, qubit_hamiltonian, TimeWindow(5.0, 0.3)) == pytest.approx(math.cos(0.3))

def test_window_for_system(qubit_hamiltonian, plus):
    assert TimeWindow.for_system(qubit_hamiltonian, plus, 1.0, 0.5).half_width == 0.5
    with pytest.raises(ParameterError):
        TimeWindow.for_system(qubit_hamiltonian, plus, 1.0, 4.0)

def test_samples_stay_in_window(rng):
    window = TimeWindow(1.0, 0.1)
    draws = np.array([sample_local_time(rng, window) for _ in range(2000)])
    assert np.all((draws >= window.lower) & (draws <= window.upper))
    assert abs(draws.mean() - 1.0) < 0.005

def test_eigenstate_is_fixed(rng):
    H = spectral_decompose(random_hermitian(rng, 4))
    psi = StateVector(H.basis[:, 2], (4,))
    sigma = sigma_map(psi, H, TimeWindow(1.5, 0.4))
    assert np.allclose(sigma.matrix, np.outer(psi.amplitudes, psi.amplitudes.conj()), atol=1e-12)

def test_narrow_window_is_plain_evolution(rng):
    H = spectral_decompose(random_hermitian(rng, 4))
    psi = random_state(rng, (4,))
    evolved = evolve(psi, H, 1.3).amplitudes
    sigma = sigma_map(psi, H, TimeWindow(1.3, 1e-6))
    assert np.allclose(sigma.matrix, np.outer(evolved, evolved.conj()), atol=1e-9)
    assert sigma.purity() == pytest.approx(1.0, abs=1e-9)

def test_constructor_leaves_admissibility_to_for_system(qubit_hamiltonian, plus):
    window = TimeWindow(5.0, 4.0)
    assert window.half_width > tau_min(qubit_hamiltonian, plus)
    with pytest.raises(ParameterError):
        TimeWindow.for_system(qubit_hamiltonian, plus, 5.0, 4.0)
