"""
Composite systems: a Hamiltonian made of self terms and pair couplings, the blocks which are approximately isolated from each other,
and the evolution of each block by its own local time.

The usual flow is

    H = CompositeHamiltonian(...)
    partition = detect_partition(psi, H)
    trajectory = apply_transition(Trajectory.start(H, psi), partition, rng, t0=..., half_widths=...)

Every transition freezes the times of the previous structure into parameters of the trajectory.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Hashable, Iterable, Iterator, Mapping, Set, Tuple
import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import (DEGENERACY_TOLERANCE, DimensionError, ParameterError, SpectralDecomposition, StateVector,
        apply_operator, check_hermitian, embed_operator, evolve, expectation, fidelity, spectral_decompose, warn_flagged)
from .ltsmap import TimeWindow, sample_local_time
from .metrics import orthogonal_time_bound
from .misc import debug_channels, trace

DEFAULT_EPSILON:float = 1e-3
""" Relative coupling threshold below which blocks count as isolated. """
DEFAULT_PROBES:int = 8
TIE_TOLERANCE:float = 1e-9
ENERGY_SCALE_FLOOR:float = 1e-12
REPLAY_TOLERANCE:float = 1e-10

DEBUG:Set[str] = debug_channels()
#DEBUG.add("detect_partition")
#DEBUG.add("compare_factorizations")
#DEBUG.add("apply_transition")

Block = FrozenSet[Hashable]
Pair = Tuple[Hashable, Hashable]

@dataclass(frozen=True, eq=False)
class CompositeHamiltonian:
    """ H = sum_i H_i + sum_{i<j} H_ij over an ordered list of subsystems.

    Subsystems are `(id, dimension)` pairs. A pair term is keyed by the two ids, in any order,
    and acts on the joint space of the two subsystems taken in subsystem order.
    """

    subsystems:Tuple[Tuple[Hashable, int], ...]
    self_terms:Mapping[Hashable, np.ndarray]
    pair_terms:Mapping[Pair, np.ndarray] = field(default_factory=dict)
    _cache:Dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        subsystems = tuple((sid, int(d)) for sid, d in self.subsystems)
        if len(subsystems) == 0:
            raise DimensionError("A composite system needs at least one subsystem.")
        ids = [sid for sid, _ in subsystems]
        if len(set(ids)) != len(ids):
            raise DimensionError(f"Subsystem ids {ids} are not unique.")
        object.__setattr__(self, "subsystems", subsystems)
        dim = dict(subsystems)
        order = {sid: k for k, sid in enumerate(ids)}

        selfs = {}
        for sid, op in self.self_terms.items():
            if sid not in dim:
                raise DimensionError(f"Self term for unknown subsystem {sid!r}.")
            op = check_hermitian(op, what=f"Self term of {sid!r}")
            if op.shape[0] != dim[sid]:
                raise DimensionError(f"Self term of {sid!r} has dimension {op.shape[0]}, expected {dim[sid]}.")
            selfs[sid] = op
        for sid in ids:
            selfs.setdefault(sid, np.zeros((dim[sid], dim[sid]), dtype=complex))

        pairs = {}
        for key, op in self.pair_terms.items():
            a, b = key
            if a not in dim or b not in dim or a == b:
                raise DimensionError(f"Pair term {key!r} does not name two distinct subsystems.")
            a, b = sorted((a, b), key=order.__getitem__)
            op = check_hermitian(op, what=f"Pair term {key!r}")
            if op.shape[0] != dim[a] * dim[b]:
                raise DimensionError(f"Pair term {key!r} has dimension {op.shape[0]}, expected {dim[a] * dim[b]}.")
            if (a, b) in pairs:
                raise DimensionError(f"Pair term {key!r} given twice.")
            pairs[(a, b)] = op
        object.__setattr__(self, "self_terms", selfs)
        object.__setattr__(self, "pair_terms", pairs)

    @property
    def ids(self) -> Tuple[Hashable, ...]:
        return tuple(sid for sid, _ in self.subsystems)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(d for _, d in self.subsystems)

    @property
    def dimension(self) -> int:
        return math.prod(self.dims)

    def index(self, sid:Hashable) -> int:
        try:
            return self.ids.index(sid)
        except ValueError:
            raise DimensionError(f"Unknown subsystem {sid!r}.") from None

    def ordered(self, ids:Iterable[Hashable]) -> Tuple[Hashable, ...]:
        """ The given ids sorted in subsystem order. """
        return tuple(sorted(set(ids), key=self.index))

    def block(self, ids:Iterable[Hashable]) -> np.ndarray:
        """ The block-local Hamiltonian: self terms and the pair terms inside the block, on the block's space in subsystem order. """
        members = self.ordered(ids)
        dims = tuple(self.dims[self.index(sid)] for sid in members)
        local = {sid: k for k, sid in enumerate(members)}
        d = math.prod(dims)
        H = np.zeros((d, d), dtype=complex)
        for sid in members:
            H += embed_operator(self.self_terms[sid], (local[sid],), dims)
        for (a, b), op in self.pair_terms.items():
            if a in local and b in local:
                H += embed_operator(op, (local[a], local[b]), dims)
        return H

    def full(self) -> np.ndarray:
        return self.block(self.ids)

    def block_spectrum(self, ids:Iterable[Hashable], tol:float=DEGENERACY_TOLERANCE) -> SpectralDecomposition:
        members = self.ordered(ids)
        key = ("block", members, tol)
        if key not in self._cache:
            dims = tuple(self.dims[self.index(sid)] for sid in members)
            self._cache[key] = spectral_decompose(self.block(members), dims, tol)
        return self._cache[key]

    def spectrum(self) -> SpectralDecomposition:
        return self.block_spectrum(self.ids)

    def self_excess(self, psi:StateVector, sid:Hashable) -> float:
        """ <H_i> - E_ig """
        self._fits(psi)
        op = self.self_terms[sid]
        mean = expectation(psi, op, (self.index(sid),)).real
        return float(mean - np.linalg.eigvalsh(op)[0])

    def block_excess(self, psi:StateVector, ids:Iterable[Hashable]) -> float:
        """ <H_block> - E_block_ground """
        self._fits(psi)
        members = self.ordered(ids)
        mean = expectation(psi, self.block(members), tuple(self.index(sid) for sid in members)).real
        return float(max(mean - self.block_spectrum(members).ground_energy, 0.0))

    def _fits(self, psi:StateVector) -> None:
        if psi.dims != self.dims:
            raise DimensionError(f"State with dimensions {psi.dims} does not fit the system {self.dims}.")

@dataclass(frozen=True, eq=False)
class Partition:
    """ Disjoint blocks of subsystem ids. Equality ignores the order of blocks. """
    blocks:Tuple[Block, ...]

    def __post_init__(self) -> None:
        blocks = tuple(frozenset(b) for b in self.blocks)
        if len(blocks) == 0:
            raise ParameterError("A partition needs at least one block.")
        if any(len(b) == 0 for b in blocks):
            raise ParameterError("Partition blocks must not be empty.")
        seen = set()
        for b in blocks:
            if seen & b:
                raise ParameterError(f"Partition blocks overlap in {seen & b}.")
            seen |= b
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def of(cls, H:CompositeHamiltonian, blocks:Iterable[Iterable[Hashable]]) -> "Partition":
        """ A partition checked to cover the system, blocks ordered by their first subsystem. """
        ordered = sorted((H.ordered(b) for b in blocks), key=lambda b: H.index(b[0]))
        p = cls(tuple(frozenset(b) for b in ordered))
        p.validate(H)
        return p

    @classmethod
    def trivial(cls, H:CompositeHamiltonian) -> "Partition":
        return cls((frozenset(H.ids),))

    @classmethod
    def singletons(cls, H:CompositeHamiltonian) -> "Partition":
        return cls(tuple(frozenset((sid,)) for sid in H.ids))

    def validate(self, H:CompositeHamiltonian) -> None:
        covered = frozenset().union(*self.blocks)
        if covered != frozenset(H.ids):
            raise ParameterError(f"Partition covers {set(covered)} instead of all subsystems {set(H.ids)}.")

    def coarser_than(self, other:"Partition") -> bool:
        return len(self.blocks) < len(other.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[Block]:
        return iter(self.blocks)

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and set(self.blocks) == set(other.blocks)

    def __hash__(self) -> int:
        return hash(frozenset(self.blocks))

    def __repr__(self) -> str:
        inner = ", ".join("{" + ", ".join(sorted(map(repr, b))) + "}" for b in self.blocks)
        return f"Partition({inner})"

@dataclass(frozen=True)
class BlockTime:
    """ A block's local time and the window it was drawn from. """
    t:float
    t0:float
    half_width:float

    def __post_init__(self) -> None:
        if self.half_width < 0 or abs(self.t - self.t0) > self.half_width * (1 + 1e-12) + 1e-15:
            raise ParameterError(f"Local time {self.t} lies outside of [{self.t0} - {self.half_width}, {self.t0} + {self.half_width}].")

@dataclass(frozen=True, eq=False)
class LocalTimeAssignment:
    """ One local time per block of a partition. """
    times:Mapping[Block, BlockTime]

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", {frozenset(b): bt for b, bt in self.times.items()})

    @classmethod
    def uniform(cls, partition:Partition, t:float) -> "LocalTimeAssignment":
        """ The same sharp time for every block. """
        return cls({b: BlockTime(t, t, 0.0) for b in partition})

    @classmethod
    def explicit(cls, times:Mapping[Iterable[Hashable], float]) -> "LocalTimeAssignment":
        return cls({frozenset(b): BlockTime(t, t, 0.0) for b, t in times.items()})

    def time_of(self, block:Iterable[Hashable]) -> float:
        key = frozenset(block)
        if key not in self.times:
            raise ParameterError(f"No local time assigned to block {set(key)}.")
        return self.times[key].t

    def covers(self, partition:Partition) -> bool:
        return all(b in self.times for b in partition)

def interaction_means(psi:StateVector, H:CompositeHamiltonian) -> Dict[Pair, float]:
    """ <psi|H_pq|psi> for every pair term. """
    H._fits(psi)
    return {(a, b): expectation(psi, op, (H.index(a), H.index(b))).real for (a, b), op in H.pair_terms.items()}

@dataclass(frozen=True)
class CouplingGraph:
    """ The measured pair couplings, the threshold they were compared with and the edges above it. """
    ids:Tuple[Hashable, ...]
    means:Mapping[Pair, float]
    energy_scale:float
    threshold:float
    edges:Tuple[Pair, ...]

def coupling_graph(psi:StateVector, H:CompositeHamiltonian, epsilon:float=DEFAULT_EPSILON) -> CouplingGraph:
    if not epsilon > 0:
        raise ParameterError(f"Coupling threshold must be positive, got {epsilon}.")
    means = interaction_means(psi, H)
    scale = max(max(H.self_excess(psi, sid) for sid in H.ids), ENERGY_SCALE_FLOOR)
    threshold = epsilon * scale
    edges = tuple(pair for pair, m in means.items() if abs(m) > threshold)
    return CouplingGraph(H.ids, means, scale, threshold, edges)

def detect_partition(psi:StateVector, H:CompositeHamiltonian, epsilon:float=DEFAULT_EPSILON) -> Partition:
    """ Blocks are the connected components of the graph of couplings whose mean exceeds epsilon times the energy scale. """
    graph = coupling_graph(psi, H, epsilon)
    n = len(H.ids)
    rows = [H.index(a) for a, _ in graph.edges]
    cols = [H.index(b) for _, b in graph.edges]
    adjacency = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(adjacency, directed=False)
    blocks: Dict[int, list] = {}
    for sid, label in zip(H.ids, labels):
        blocks.setdefault(int(label), []).append(sid)
    partition = Partition.of(H, blocks.values())
    trace(DEBUG, "detect_partition", f"threshold {graph.threshold}, edges {graph.edges} -> {partition}")
    return partition

def evolve_block(psi:StateVector, H:CompositeHamiltonian, block:Iterable[Hashable], t:float) -> StateVector:
    """ exp(-i H_block t) acting on the block's factor only. """
    H._fits(psi)
    members = H.ordered(block)
    U = H.block_spectrum(members).unitary(t)
    return StateVector(apply_operator(psi.amplitudes, psi.dims, U, tuple(H.index(sid) for sid in members)), psi.dims)

def multi_time_evolve(psi:StateVector, H:CompositeHamiltonian, partition:Partition, times:LocalTimeAssignment) -> StateVector:
    """ The product evolution (x)_blocks exp(-i H_block t_block). Pair terms across blocks are dropped. """
    partition.validate(H)
    for b in partition:
        times.time_of(b)
    for b in partition:
        psi = evolve_block(psi, H, b, times.time_of(b))
    return psi

@dataclass(frozen=True)
class FactorizationDecision:
    """ Outcome of comparing two candidate partitions against the exact evolution. """
    fidelity_a:float
    fidelity_b:float
    winner:Partition
    degenerate:bool
    horizon:float

def compare_factorizations(psi:StateVector, H:CompositeHamiltonian, A:Partition, B:Partition,
        horizon:float|None=None, n_probe:int=DEFAULT_PROBES) -> FactorizationDecision:
    """ Decides which factorization tracks the exact evolution better, by fidelity averaged over `n_probe` equispaced times up to `horizon`.
    Without a horizon, the orthogonal-transition bound of the blocks' excess energies is used. Ties go to the coarser partition. """
    A.validate(H)
    B.validate(H)
    if n_probe < 2:
        raise ParameterError(f"At least two probe times are needed, got {n_probe}.")
    if horizon is None:
        bounds = []
        for P in (A, B):
            excess = [H.block_excess(psi, b) for b in P]
            if any(e > 0 for e in excess):
                bounds.append(orthogonal_time_bound(excess))
        if not bounds:
            raise ParameterError("The state carries no excess energy in any block; give an explicit horizon.")
        horizon = max(bounds)
    if not horizon > 0:
        raise ParameterError(f"Comparison horizon must be positive, got {horizon}.")

    exact = H.spectrum()
    probes = horizon * np.arange(1, n_probe + 1) / n_probe
    scores = []
    for P in (A, B):
        values = [fidelity(evolve(psi, exact, t), multi_time_evolve(psi, H, P, LocalTimeAssignment.uniform(P, t))) for t in probes]
        scores.append(float(np.mean(values)))
    fa, fb = scores
    degenerate = abs(fa - fb) < TIE_TOLERANCE
    if degenerate:
        winner = B if B.coarser_than(A) else A
        warn_flagged(f"Factorizations {A} and {B} are indistinguishable (fidelities {fa}, {fb}); keeping {winner}.")
    else:
        winner = A if fa > fb else B
    trace(DEBUG, "compare_factorizations", f"{A}: {fa}, {B}: {fb}, horizon {horizon} -> {winner}")
    return FactorizationDecision(fa, fb, winner, degenerate, float(horizon))

@dataclass(frozen=True, eq=False)
class TrajectoryStep:
    state:StateVector
    partition:Partition
    times:LocalTimeAssignment

@dataclass(frozen=True, eq=False)
class Trajectory:
    """ A continuous, piecewise multi-time trajectory. Consecutive states are connected by the recorded product evolution.
    Appending returns a new trajectory; the recorded history never changes. """
    hamiltonian:CompositeHamiltonian
    initial:StateVector
    steps:Tuple[TrajectoryStep, ...] = ()

    @classmethod
    def start(cls, H:CompositeHamiltonian, psi:StateVector) -> "Trajectory":
        H._fits(psi)
        return cls(H, psi, ())

    @property
    def state(self) -> StateVector:
        return self.steps[-1].state if self.steps else self.initial

    def __len__(self) -> int:
        return len(self.steps)

    def extended(self, step:TrajectoryStep) -> "Trajectory":
        return Trajectory(self.hamiltonian, self.initial, self.steps + (step,))

    @property
    def frozen_parameters(self) -> Tuple[LocalTimeAssignment, ...]:
        """ Times of every structure but the current one; they no longer evolve. """
        return tuple(s.times for s in self.steps[:-1])

    def replay(self) -> float:
        """ Re-evaluates every recorded step and returns the largest deviation from the stored states. """
        psi = self.initial
        worst = 0.0
        for step in self.steps:
            psi = multi_time_evolve(psi, self.hamiltonian, step.partition, step.times)
            worst = max(worst, float(np.linalg.norm(psi.amplitudes - step.state.amplitudes)))
            psi = step.state
        return worst

def apply_transition(traj:Trajectory, new_partition:Partition, rng:np.random.Generator, t0:float=1.0,
        half_widths:float|Mapping[Block, float]=0.1, times:LocalTimeAssignment|None=None, sigma:float|None=None) -> Trajectory:
    """ Switches the trajectory to a new block structure.

    Each new block gets a local time drawn from the truncated Gaussian around `t0` (with its own half width, if a mapping is given),
    unless explicit `times` are passed. The current state evolves under the new product evolution and the step is appended.
    """
    H = traj.hamiltonian
    new_partition.validate(H)
    if times is None:
        assigned = {}
        for b in new_partition:
            hw = half_widths[b] if isinstance(half_widths, Mapping) else half_widths
            window = TimeWindow(t0, hw, sigma)
            assigned[b] = BlockTime(sample_local_time(rng, window), t0, hw)
        times = LocalTimeAssignment(assigned)
    if not times.covers(new_partition):
        raise ParameterError(f"Times {times.times} do not cover {new_partition}.")
    state = multi_time_evolve(traj.state, H, new_partition, times)
    trace(DEBUG, "apply_transition", f"{new_partition} at {[times.time_of(b) for b in new_partition]}")
    return traj.extended(TrajectoryStep(state, new_partition, times))

def restructure(traj:Trajectory, rng:np.random.Generator, epsilon:float=DEFAULT_EPSILON, t0:float=1.0, half_width:float=0.1) -> Trajectory:
    """ One round of the operational loop: detect the blocks of the current state, assign their times, evolve. """
    partition = detect_partition(traj.state, traj.hamiltonian, epsilon)
    return apply_transition(traj, partition, rng, t0=t0, half_widths=half_width)
