"""
Irreversibility of restructuring: the relative entropy between forward and reverse transition probabilities
of coarse-grained local-time tuples, and the plain demonstration that undoing a structural change with freshly drawn
local times does not bring the state back.
"""

from dataclasses import dataclass
from itertools import product
from typing import Hashable, Sequence, Set, Tuple
import math

import numpy as np

from . import ParameterError, StateVector, fidelity, warn_flagged
from .composite import CompositeHamiltonian, LocalTimeAssignment, Partition, multi_time_evolve
from .ltsmap import TimeWindow, sample_local_time
from .misc import debug_channels, trace

PROBABILITY_TOLERANCE:float = 1e-12
DEFAULT_BINS:int = 16

DEBUG:Set[str] = debug_channels()
#DEBUG.add("relative_entropy")
#DEBUG.add("plain_irreversibility_demo")

def _check_probabilities(p:np.ndarray, what:str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ParameterError(f"{what} has negative entries.")
    total = p.sum()
    if abs(total - 1) > PROBABILITY_TOLERANCE:
        raise ParameterError(f"{what} sums to {total!r}, not 1.")
    return p

@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    labels:Tuple[Hashable, ...]
    probabilities:np.ndarray

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        p = _check_probabilities(np.asarray(self.probabilities, dtype=float).reshape(-1), "Distribution")
        if p.size != len(labels) or len(set(labels)) != len(labels):
            raise ParameterError(f"{p.size} probabilities do not match {len(labels)} distinct labels.")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probabilities", p)

@dataclass(frozen=True, eq=False)
class TransitionTable:
    """ Joint probabilities P(x -> x') over ordered pairs of labels. Row is the origin, column the destination. """
    labels:Tuple[Hashable, ...]
    matrix:np.ndarray

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(labels), len(labels)):
            raise ParameterError(f"Table of shape {m.shape} does not match {len(labels)} labels.")
        _check_probabilities(m, "Transition table")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", m)

def relative_entropy(T:TransitionTable) -> float:
    """ sum P(x -> x') log(P(x -> x') / P(x' -> x)) in nats, with 0 log 0 = 0.
    A transition whose reverse never happens makes the result infinite. """
    forward = T.matrix
    reverse = T.matrix.T
    support = forward > 0
    if np.any(support & (reverse == 0)):
        warn_flagged("A transition has no reverse; the relative entropy is infinite.")
        return math.inf
    value = float(np.sum(forward[support] * np.log(forward[support] / reverse[support])))
    trace(DEBUG, "relative_entropy", f"{len(T.labels)} labels -> {value}")
    return value

def detailed_balance(T:TransitionTable, tol:float=PROBABILITY_TOLERANCE) -> bool:
    return bool(np.all(np.abs(T.matrix - T.matrix.T) <= tol))

def redistribution_table(p_before:DiscreteDistribution, p_after:DiscreteDistribution) -> TransitionTable:
    """ Transitions between time tuples drawn independently: P(x -> x') = p_before(x) p_after(x').

    Over one label set both distributions describe the same structure and have to agree.
    Over two label sets the table spans both, and every inverse transition carries the weight of its forward one;
    each direction gets half of the probability.
    """
    if set(p_before.labels) == set(p_after.labels):
        after = np.array([p_after.probabilities[p_after.labels.index(x)] for x in p_before.labels])
        if np.max(np.abs(after - p_before.probabilities)) > PROBABILITY_TOLERANCE:
            raise ParameterError("Distributions over one label set must coincide; one structure has one time distribution.")
        return TransitionTable(p_before.labels, np.outer(p_before.probabilities, after))
    n, m = len(p_before.labels), len(p_after.labels)
    labels = tuple(("before", x) for x in p_before.labels) + tuple(("after", x) for x in p_after.labels)
    table = np.zeros((n + m, n + m))
    forward = 0.5 * np.outer(p_before.probabilities, p_after.probabilities)
    table[:n, n:] = forward
    table[n:, :n] = forward.T
    return TransitionTable(labels, table)

def coarse_grain_window(window:TimeWindow, n_bins:int=DEFAULT_BINS) -> DiscreteDistribution:
    """ The truncated Gaussian local-time density binned on equal bins over its window; labels are bin centres. """
    if n_bins < 1:
        raise ParameterError(f"At least one bin is needed, got {n_bins}.")
    edges = np.linspace(window.lower, window.upper, n_bins + 1)
    p = np.diff(window.distribution().cdf(edges))
    p /= p.sum()
    return DiscreteDistribution(tuple(0.5 * (edges[:-1] + edges[1:])), p)

def time_tuple_distribution(windows:Sequence[TimeWindow], n_bins:int=DEFAULT_BINS) -> DiscreteDistribution:
    """ Joint distribution of the binned local times of independent blocks. """
    marginals = [coarse_grain_window(w, n_bins) for w in windows]
    labels = tuple(product(*(d.labels for d in marginals)))
    p = marginals[0].probabilities
    for d in marginals[1:]:
        p = np.outer(p, d.probabilities).reshape(-1)
    return DiscreteDistribution(labels, p / p.sum())

@dataclass(frozen=True, eq=False)
class IrreversibilityDemo:
    """ Return fidelities of trials undone with fresh local times, and of controls undone with the original ones. """
    fidelities:np.ndarray
    control_fidelities:np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.fidelities))

    def returned(self, tol:float=1e-12) -> int:
        """ Number of trials which came back to the initial state. """
        return int(np.count_nonzero(self.fidelities >= 1 - tol))

def plain_irreversibility_demo(psi0:StateVector, H:CompositeHamiltonian, partition_sequence:Sequence[Partition],
        rng:np.random.Generator, n_trials:int=100, t0:float=1.0, half_width:float=0.1, sigma:float|None=None) -> IrreversibilityDemo:
    """ Runs the structures of `partition_sequence` forward with sampled local times, then undoes them in reverse order.
    The trial undoes each structure with fresh local times, the control with the ones used going forward. """
    if len(partition_sequence) < 1:
        raise ParameterError("At least one structure is needed to run forward and back.")
    if n_trials < 1:
        raise ParameterError(f"At least one trial is needed, got {n_trials}.")
    window = TimeWindow(t0, half_width, sigma)

    def draw(P:Partition) -> dict:
        return {b: sample_local_time(rng, window) for b in P}

    def run(psi:StateVector, P:Partition, times:dict, sign:float) -> StateVector:
        return multi_time_evolve(psi, H, P, LocalTimeAssignment.explicit({b: sign * t for b, t in times.items()}))

    trials, controls = [], []
    for _ in range(n_trials):
        psi = psi0
        used = []
        for P in partition_sequence:
            times = draw(P)
            used.append(times)
            psi = run(psi, P, times, 1.0)
        back, control = psi, psi
        for P, times in zip(reversed(partition_sequence), reversed(used)):
            back = run(back, P, draw(P), -1.0)
            control = run(control, P, times, -1.0)
        trials.append(fidelity(psi0, back))
        controls.append(fidelity(psi0, control))
    trace(DEBUG, "plain_irreversibility_demo", f"mean fidelity {np.mean(trials)}, control {np.mean(controls)}")
    return IrreversibilityDemo(np.array(trials), np.array(controls))
