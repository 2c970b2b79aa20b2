import math

import numpy as np
import pytest

from localtimes import ParameterError, StateVector, random_hermitian, random_state, spectral_decompose
from localtimes.composite import CompositeHamiltonian, LocalTimeAssignment, Partition, multi_time_evolve
from localtimes.metrics import (BlockSpectra, BlockSpectrum, golden_overlap, golden_overlap_configuration, haar_shell_moments,
        individuality_I, margolus_bound, median_overlap_modulus, orthogonal_time_bound, orthogonalization_time, overlap_density,
        overlap_S, overlap_uniform_density, survival_amplitude, to_energy_basis)

def test_golden_overlap():
    assert golden_overlap() == pytest.approx(0.0292, abs=5e-4)
    psi, blocks, offsets = golden_overlap_configuration(2.0, 3.0)
    assert abs(overlap_S(psi, blocks, offsets)) ** 2 == pytest.approx(golden_overlap(), abs=1e-12)

def test_uniform_phase_density():
    closed = overlap_uniform_density(10.0)
    assert 0.188 <= closed <= 0.195
    assert overlap_uniform_density(0.0) == 1.0
    x = np.linspace(0.0, 10.0, 2001)
    assert abs(overlap_density(x, np.full_like(x, 0.1), method="simpson")) == pytest.approx(closed, abs=1e-8)
    x = np.linspace(0.0, 10.0, 200001)
    assert abs(overlap_density(x, np.full_like(x, 0.1))) == pytest.approx(closed, abs=1e-8)

def test_density_must_be_normalized():
    x = np.linspace(0.0, 1.0, 11)
    with pytest.raises(ParameterError):
        overlap_density(x, np.full_like(x, 2.0))
    with pytest.raises(ParameterError):
        overlap_density(x, np.ones_like(x), method="midpoint")

def test_zero_offsets_are_identity(rng):
    blocks = BlockSpectra((BlockSpectrum.nondegenerate([0.0, 1.3]), BlockSpectrum(np.array([-1.0, 2.0]), np.array([2, 1]))))
    psi = random_state(rng, blocks.dims)
    assert overlap_S(psi, blocks, [0.0, 0.0]) == pytest.approx(1.0)
    assert individuality_I(blocks, [0.0, 0.0]) == pytest.approx(1.0)

def test_overlap_matches_evolution(rng):
    dims = (2, 3, 2)
    for _ in range(50):
        H = CompositeHamiltonian(tuple(enumerate(dims)), {k: random_hermitian(rng, d) for k, d in enumerate(dims)})
        psi = random_state(rng, dims)
        P = Partition.singletons(H)
        t = rng.uniform(0, 2, 3)
        dt = rng.uniform(-1, 1, 3)
        before = multi_time_evolve(psi, H, P, LocalTimeAssignment.explicit({(k,): t[k] for k in range(3)}))
        after = multi_time_evolve(psi, H, P, LocalTimeAssignment.explicit({(k,): t[k] + dt[k] for k in range(3)}))
        energy_psi, blocks = to_energy_basis(psi, [H.block_spectrum((k,)) for k in range(3)])
        assert abs(overlap_S(energy_psi, blocks, dt) - before.inner(after)) <= 1e-10

def test_individuality_is_normalized_trace(rng):
    a = spectral_decompose(random_hermitian(rng, 3))
    b = spectral_decompose(random_hermitian(rng, 2))
    dt = (0.4, -1.1)
    U = np.kron(a.unitary(dt[0]), b.unitary(dt[1]))
    assert abs(individuality_I(BlockSpectra.of([a, b]), dt) - np.trace(U) / 6) <= 1e-12

def test_uniform_state_overlap_is_individuality():
    blocks = BlockSpectra((BlockSpectrum.nondegenerate([0.1, 0.5, 0.9]), BlockSpectrum.nondegenerate([-1.0, 1.0])))
    psi = StateVector(np.full(6, 1 / math.sqrt(6)), blocks.dims)
    assert abs(overlap_S(psi, blocks, [0.3, 0.7]) - individuality_I(blocks, [0.3, 0.7])) <= 1e-12

def test_qubit_orthogonalization(qubit_hamiltonian, plus):
    assert orthogonalization_time(plus, qubit_hamiltonian, 4 * math.pi) == pytest.approx(math.pi, abs=1e-6)
    assert margolus_bound(0.5, 0.5) == pytest.approx(math.pi)
    assert abs(survival_amplitude(plus, qubit_hamiltonian, 0.0) - 1) < 1e-12

def test_no_orthogonalization_before_horizon(qubit_hamiltonian):
    psi = StateVector.normalized(np.array([2, 1]), (2,))
    assert orthogonalization_time(psi, qubit_hamiltonian, 10.0) is None

def test_joint_bound_falls_with_blocks(rng):
    excess = rng.uniform(0.1, 1.0, 10)
    bounds = [orthogonal_time_bound(excess[:n]) for n in range(1, 11)]
    assert all(later < earlier for earlier, later in zip(bounds, bounds[1:]))
    assert orthogonal_time_bound([0.5]) == pytest.approx(math.pi)
    with pytest.raises(ParameterError):
        orthogonal_time_bound([0.0, 0.0])
    with pytest.raises(ParameterError):
        orthogonal_time_bound([-1.0])

def test_haar_moments(rng):
    report = haar_shell_moments(rng, 16, 100000)
    assert report.n == 100000
    assert report.target_c2 == pytest.approx(1 / 16)
    assert report.target_c4 == pytest.approx(2 / (16 * 17))
    assert max(report.deviations()) < 4

def test_moments_need_enough_samples(rng):
    with pytest.raises(ParameterError):
        haar_shell_moments(rng, 4, 9999)
    with pytest.raises(ParameterError):
        haar_shell_moments(rng, 1, 100000)

def test_moments_pool_across_chunks():
    a = haar_shell_moments(np.random.default_rng(5), 4, 10000, chunk=3000)
    b = haar_shell_moments(np.random.default_rng(5), 4, 10000, chunk=3000)
    pooled = a.merge(b)
    assert pooled.n == 20000
    assert pooled.mean_c2 == pytest.approx(a.mean_c2)

def test_typical_overlap_falls_with_blocks(rng):
    assert median_overlap_modulus(rng, 6, n_samples=100) < median_overlap_modulus(rng, 2, n_samples=100)

def test_energy_shift_is_a_global_phase(rng):
    a, b = BlockSpectrum.nondegenerate(rng.normal(size=3)), BlockSpectrum.nondegenerate(rng.normal(size=2))
    shifted = BlockSpectrum.nondegenerate(a.energies + 2.5)
    psi = random_state(rng, (3, 2))
    offsets = [0.7, -0.4]
    S = overlap_S(psi, BlockSpectra((a, b)), offsets)
    S_shifted = overlap_S(psi, BlockSpectra((shifted, b)), offsets)
    assert abs(S_shifted - S * np.exp(-2.5j * 0.7)) <= 1e-12
    assert abs(S_shifted) == pytest.approx(abs(S), abs=1e-12)

def test_individuality_factorizes_over_blocks(rng):
    a = BlockSpectrum(rng.normal(size=3), np.array([1, 2, 1]))
    b = BlockSpectrum.nondegenerate(rng.normal(size=2))
    joint = individuality_I(BlockSpectra((a, b)), [0.6, 1.1])
    assert abs(joint - individuality_I(BlockSpectra((a,)), [0.6]) * individuality_I(BlockSpectra((b,)), [1.1])) <= 1e-12

@pytest.mark.parametrize("delta", [0.0, 0.4, 1.0, math.pi, 5.0])
def test_qubit_individuality(delta):
    qubit = BlockSpectra((BlockSpectrum.nondegenerate([-0.5, 0.5]),))
    assert individuality_I(qubit, [delta]) == pytest.approx(math.cos(delta / 2), abs=1e-12)

def test_qubit_haar_fourth_moment(rng):
    report = haar_shell_moments(rng, 2, 100000)
    assert report.target_c4 == pytest.approx(1 / 3)
    assert abs(report.mean_c4 - 1 / 3) < 4 * report.se_mean_c4
