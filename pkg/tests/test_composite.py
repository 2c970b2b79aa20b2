import numpy as np
import pytest

from localtimes import (IDENTITY_2, SIGMA_X, SIGMA_Z, DimensionError, LocalTimeWarning, ParameterError, basis_state, evolve,
        StateVector, fidelity, random_state)
from localtimes.composite import (BlockTime, CompositeHamiltonian, LocalTimeAssignment, Partition, Trajectory, apply_transition,
        compare_factorizations, coupling_graph, detect_partition, evolve_block, interaction_means, multi_time_evolve, restructure)
from localtimes.examples.four_body_restructuring import chain_hamiltonian

def three_qubits(coupling:float=0.3) -> CompositeHamiltonian:
    """ Qubits 0 and 1 coupled by sigma_z sigma_z, qubit 2 alone. """
    return CompositeHamiltonian(
        ((0, 2), (1, 2), (2, 2)),
        {0: 0.5 * SIGMA_Z, 1: 0.6 * SIGMA_Z, 2: 0.4 * SIGMA_Z},
        {(0, 1): coupling * np.kron(SIGMA_Z, SIGMA_Z)} if coupling else {},
    )

def test_full_hamiltonian():
    H = three_qubits()
    expected = (0.5 * np.kron(np.kron(SIGMA_Z, IDENTITY_2), IDENTITY_2)
            + 0.6 * np.kron(np.kron(IDENTITY_2, SIGMA_Z), IDENTITY_2)
            + 0.4 * np.kron(np.kron(IDENTITY_2, IDENTITY_2), SIGMA_Z)
            + 0.3 * np.kron(np.kron(SIGMA_Z, SIGMA_Z), IDENTITY_2))
    assert np.allclose(H.full(), expected)

def test_pair_keys_follow_subsystem_order():
    H = CompositeHamiltonian((("a", 2), ("b", 2)), {}, {("b", "a"): np.kron(SIGMA_X, SIGMA_Z)})
    assert list(H.pair_terms) == [("a", "b")]

def test_construction_errors():
    with pytest.raises(DimensionError):
        CompositeHamiltonian(((0, 2), (0, 2)), {})
    with pytest.raises(DimensionError):
        CompositeHamiltonian(((0, 2),), {0: np.eye(3)})
    with pytest.raises(DimensionError):
        CompositeHamiltonian(((0, 2), (1, 2)), {}, {(0, 2): np.eye(4)})

def test_detects_coupled_pair():
    H = three_qubits()
    psi = basis_state(H.dims, 0)
    assert interaction_means(psi, H)[(0, 1)] == pytest.approx(0.3)
    graph = coupling_graph(psi, H)
    assert graph.edges == ((0, 1),)
    assert graph.energy_scale == pytest.approx(1.2)
    assert detect_partition(psi, H) == Partition.of(H, [[2], [1, 0]])

def test_uncoupled_subsystems_are_singletons(rng):
    H = three_qubits(0.0)
    assert detect_partition(random_state(rng, H.dims), H) == Partition.singletons(H)

def test_partition_checks():
    H = three_qubits()
    with pytest.raises(ParameterError):
        Partition(({0, 1}, {1, 2}))
    with pytest.raises(ParameterError):
        Partition.of(H, [[0, 1]])
    assert Partition.of(H, [[0], [1, 2]]).coarser_than(Partition.singletons(H))

def test_uniform_times_of_uncoupled_blocks_are_exact(rng):
    H = three_qubits(0.0)
    psi = random_state(rng, H.dims)
    P = Partition.singletons(H)
    product = multi_time_evolve(psi, H, P, LocalTimeAssignment.uniform(P, 1.7))
    assert fidelity(product, evolve(psi, H.spectrum(), 1.7)) == pytest.approx(1.0, abs=1e-12)

def test_trivial_partition_is_exact(rng):
    H = three_qubits()
    psi = random_state(rng, H.dims)
    P = Partition.trivial(H)
    out = multi_time_evolve(psi, H, P, LocalTimeAssignment.uniform(P, 0.9))
    assert np.allclose(out.amplitudes, evolve(psi, H.spectrum(), 0.9).amplitudes, atol=1e-12)

def test_missing_time():
    H = three_qubits()
    times = LocalTimeAssignment.explicit({(0, 1): 1.0})
    with pytest.raises(ParameterError):
        multi_time_evolve(basis_state(H.dims, 0), H, Partition.of(H, [[0, 1], [2]]), times)

def test_block_time_window():
    BlockTime(1.05, 1.0, 0.1)
    with pytest.raises(ParameterError):
        BlockTime(1.2, 1.0, 0.1)

def test_tied_factorizations_prefer_coarser():
    H = three_qubits(0.0)
    psi = basis_state(H.dims, 0)
    with pytest.warns(LocalTimeWarning):
        decision = compare_factorizations(psi, H, Partition.singletons(H), Partition.trivial(H), horizon=1.0)
    assert decision.degenerate
    assert decision.winner == Partition.trivial(H)

def test_coupling_decides_factorization():
    H = CompositeHamiltonian(((0, 2), (1, 2)), {0: 0.5 * SIGMA_Z, 1: 0.5 * SIGMA_Z}, {(0, 1): np.kron(SIGMA_X, SIGMA_X)})
    psi = basis_state(H.dims, 0)
    decision = compare_factorizations(psi, H, Partition.singletons(H), Partition.trivial(H), horizon=1.0)
    assert not decision.degenerate
    assert decision.winner == Partition.trivial(H)
    assert decision.fidelity_b == pytest.approx(1.0)
    assert decision.fidelity_a < 1.0

def test_default_horizon_from_bound():
    H = three_qubits()
    psi = StateVector.normalized(np.ones(H.dimension), H.dims)
    decision = compare_factorizations(psi, H, Partition.of(H, [[0, 1], [2]]), Partition.singletons(H))
    assert decision.horizon > 0

def test_trajectory_records_and_replays(rng):
    H = three_qubits()
    start = Trajectory.start(H, random_state(rng, H.dims))
    one = apply_transition(start, Partition.of(H, [[0, 1], [2]]), rng, t0=1.0, half_widths=0.1)
    two = restructure(one, rng, t0=2.0, half_width=0.2)
    assert len(start) == 0 and len(one) == 1 and len(two) == 2
    assert len(two.frozen_parameters) == 1
    for block, bt in two.steps[0].times.times.items():
        assert abs(bt.t - 1.0) <= 0.1
    assert two.replay() <= 1e-10
    assert np.linalg.norm(two.state.amplitudes) == pytest.approx(1.0, abs=1e-12)

def test_per_block_half_widths(rng):
    H = three_qubits()
    P = Partition.of(H, [[0, 1], [2]])
    widths = {frozenset({0, 1}): 0.05, frozenset({2}): 0.3}
    traj = apply_transition(Trajectory.start(H, basis_state(H.dims, 0)), P, rng, t0=1.0, half_widths=widths)
    times = traj.steps[0].times.times
    assert abs(times[frozenset({0, 1})].t - 1.0) <= 0.05
    assert times[frozenset({2})].half_width == 0.3

def test_comparison_needs_two_sample_times():
    H = three_qubits()
    with pytest.raises(ParameterError):
        compare_factorizations(basis_state(H.dims, 0), H, Partition.singletons(H), Partition.trivial(H), horizon=1.0, n_probe=1)

def test_comparison_reports_overlap_modulus():
    H = CompositeHamiltonian(((0, 2), (1, 2)), {0: 0.5 * SIGMA_Z, 1: 0.5 * SIGMA_Z}, {(0, 1): np.kron(SIGMA_X, SIGMA_X)})
    psi = basis_state(H.dims, 0)
    times = np.arange(1, 9) / 8
    P = Partition.singletons(H)
    expected = np.mean([abs(evolve(psi, H.spectrum(), t).inner(multi_time_evolve(psi, H, P, LocalTimeAssignment.uniform(P, t))))
            for t in times])
    decision = compare_factorizations(psi, H, P, Partition.trivial(H), horizon=1.0)
    assert decision.fidelity_a == pytest.approx(expected, abs=1e-12)

def test_eigenstate_of_coupled_system_is_degenerate():
    H = three_qubits(0.3)
    psi = basis_state(H.dims, 0)
    assert abs(interaction_means(psi, H)[(0, 1)]) == pytest.approx(0.3)
    with pytest.warns(LocalTimeWarning):
        decision = compare_factorizations(psi, H, Partition.of(H, [[0, 1], [2]]), Partition.singletons(H), horizon=2.0)
    assert decision.degenerate
    assert decision.fidelity_a == pytest.approx(1.0) and decision.fidelity_b == pytest.approx(1.0)
    assert decision.winner == Partition.of(H, [[0, 1], [2]])

def _refines(fine:Partition, coarse:Partition) -> bool:
    return all(any(b <= c for c in coarse) for b in fine)

def test_detected_partition_refines_with_threshold(rng):
    H = chain_hamiltonian(fields=(0.5, 0.6, 0.7, 0.4))
    H = CompositeHamiltonian(H.subsystems, H.self_terms, dict(H.pair_terms) | {(1, 2): 0.05 * np.kron(SIGMA_Z, SIGMA_Z)})
    for _ in range(10):
        psi = random_state(rng, H.dims)
        partitions = [detect_partition(psi, H, eps) for eps in np.geomspace(1e-4, 10, 12)]
        for coarse, fine in zip(partitions, partitions[1:]):
            assert _refines(fine, coarse)
    assert len(partitions[-1]) == 4

def test_block_factors_commute(rng):
    H = chain_hamiltonian()
    psi = random_state(rng, H.dims)
    a, b = frozenset({0, 1}), frozenset({2, 3})
    one = evolve_block(evolve_block(psi, H, a, 0.8), H, b, 1.9)
    two = evolve_block(evolve_block(psi, H, b, 1.9), H, a, 0.8)
    assert np.allclose(one.amplitudes, two.amplitudes, atol=1e-12)

def test_four_qubit_partitions():
    H = chain_hamiltonian()
    psi = basis_state(H.dims, 0)
    assert detect_partition(psi, H) == Partition.of(H, [[0, 1], [2, 3]])
    middle = CompositeHamiltonian(H.subsystems, H.self_terms, {(1, 2): H.pair_terms[(0, 1)]})
    assert detect_partition(psi, middle) == Partition.of(H, [[0], [1, 2], [3]])
