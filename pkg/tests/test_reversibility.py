import math

import numpy as np
import pytest

from localtimes import SIGMA_X, SIGMA_Z, LocalTimeWarning, ParameterError, random_state
from localtimes.composite import CompositeHamiltonian, Partition
from localtimes.ltsmap import TimeWindow
from localtimes.reversibility import (DiscreteDistribution, TransitionTable, coarse_grain_window, detailed_balance,
        plain_irreversibility_demo, redistribution_table, relative_entropy, time_tuple_distribution)

def test_two_label_example():
    T = TransitionTable(("a", "b"), np.array([[0.0, 0.6], [0.4, 0.0]]))
    assert relative_entropy(T) == pytest.approx(0.2 * math.log(1.5), abs=1e-12)
    assert relative_entropy(T) == pytest.approx(0.081093, abs=1e-6)
    assert not detailed_balance(T)

def test_product_table_is_reversible():
    p = DiscreteDistribution(("x", "y", "z"), np.array([0.2, 0.3, 0.5]))
    T = redistribution_table(p, p)
    assert np.allclose(T.matrix, np.outer(p.probabilities, p.probabilities))
    assert detailed_balance(T)
    assert relative_entropy(T) == pytest.approx(0.0, abs=1e-15)

def test_same_labels_must_agree():
    p = DiscreteDistribution(("x", "y"), np.array([0.2, 0.8]))
    q = DiscreteDistribution(("y", "x"), np.array([0.2, 0.8]))
    with pytest.raises(ParameterError):
        redistribution_table(p, q)

def test_redistribution_across_structures():
    before = time_tuple_distribution([TimeWindow(1.0, 0.1)], 4)
    after = time_tuple_distribution([TimeWindow(1.0, 0.1)] * 2, 4)
    T = redistribution_table(before, after)
    assert len(T.labels) == 4 + 16
    assert T.matrix.sum() == pytest.approx(1.0)
    assert detailed_balance(T)
    assert relative_entropy(T) == pytest.approx(0.0, abs=1e-15)

def test_one_way_transition_is_infinite():
    T = TransitionTable(("a", "b"), np.array([[0.5, 0.5], [0.0, 0.0]]))
    with pytest.warns(LocalTimeWarning):
        assert math.isinf(relative_entropy(T))

def test_table_checks():
    with pytest.raises(ParameterError):
        TransitionTable(("a", "b"), np.array([[0.5, 0.5], [0.5, 0.0]]))
    with pytest.raises(ParameterError):
        DiscreteDistribution(("a", "a"), np.array([0.5, 0.5]))

def test_binned_window():
    d = coarse_grain_window(TimeWindow(1.0, 0.1), 8)
    assert d.probabilities.sum() == pytest.approx(1.0)
    assert np.allclose(d.probabilities, d.probabilities[::-1])
    assert d.labels[0] == pytest.approx(1.0 - 0.1 + 0.2 / 16)

def chain() -> CompositeHamiltonian:
    coupling = 0.3 * (np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Z, SIGMA_Z))
    return CompositeHamiltonian(((0, 2), (1, 2), (2, 2)), {0: 0.5 * SIGMA_Z, 1: 0.6 * SIGMA_Z, 2: 0.4 * SIGMA_Z},
            {(0, 1): coupling, (1, 2): coupling})

def test_fresh_times_do_not_undo_restructuring(rng):
    H = chain()
    sequence = [Partition.of(H, [[0, 1], [2]]), Partition.of(H, [[0], [1, 2]])]
    demo = plain_irreversibility_demo(random_state(rng, H.dims), H, sequence, rng, n_trials=100)
    assert np.all(np.abs(demo.control_fidelities - 1) <= 1e-10)
    assert np.all(demo.fidelities < 1)
    assert demo.returned() == 0
    assert demo.mean < 1

def test_demo_needs_a_structure(rng):
    H = chain()
    with pytest.raises(ParameterError):
        plain_irreversibility_demo(random_state(rng, H.dims), H, [], rng)
