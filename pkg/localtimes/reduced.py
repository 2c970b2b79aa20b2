"""
Reduced states of a four-body system through two restructurings:

    {1, 2, 3, 4} independent  ->  {12, 34} merged pairs  ->  {1, 23, 4}

A merged pair (a, b) is followed in its instantaneous Schmidt frame: a complete orthonormal basis w_k of the pair's space,
ordered by Schmidt weight against the rest of the system after the pair evolved for its local time.
The channel coefficients c^{ij}_k(t) = <w_k|U_ab(t)|ij> form a unitary array, and the two members of a merged pair
carry one shared channel label. Every merged subsystem is therefore a register of dimension d_a d_b, and in that
representation the reduced states below are exact:

    first stage:   rho_1 = rho_2 = sum_p r_p |p><p|,        r_p = sum_q |d_pq|^2
    second stage:  rho_1 = U_1 rho_1,first U_1^dagger,     rho_2 = sum_k lambda_k |k><k|

with d_pq = sum c_ijkl c^{ij}_p c^{kl}_q and lambda_k = sum_pq |d_pq|^2 |c^{pq}_k|^2.
"""

from dataclasses import dataclass
from typing import Sequence, Set, Tuple

import numpy as np

from . import (DensityMatrix, DimensionError, InvalidStateError, ParameterError, SpectralDecomposition, StateVector,
        apply_operator, partial_trace, random_hermitian, random_state, schmidt_basis, spectral_decompose)
from .misc import debug_channels, trace

UNITARITY_TOLERANCE:float = 1e-10

DEBUG:Set[str] = debug_channels()
#DEBUG.add("instantaneous_schmidt")
#DEBUG.add("restructuring")

@dataclass(frozen=True, eq=False)
class FourBodyAmplitudes:
    """ c_ijkl of a normalized state of four subsystems. """
    c:np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.c, dtype=complex)
        if c.ndim != 4:
            raise DimensionError(f"Four-body amplitudes need four axes, got shape {c.shape}.")
        norm = np.linalg.norm(c)
        if abs(norm - 1) > 1e-12:
            raise InvalidStateError(f"Four-body amplitudes have norm {norm!r}.")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def of(cls, psi:StateVector) -> "FourBodyAmplitudes":
        if len(psi.dims) != 4:
            raise DimensionError(f"State with dimensions {psi.dims} is not a four-body state.")
        return cls(psi.tensor())

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        return self.c.shape # type: ignore

    def state(self) -> StateVector:
        return StateVector(self.c.reshape(-1), self.dims)

@dataclass(frozen=True, eq=False)
class PairSchmidtData:
    """ Channel coefficients c^{ij}_k = <w_k|U(t)|ij> of a merged pair, shape (d_a, d_b, d_a d_b),
    and the channel vectors w_k as columns of `channels`. """
    coefficients:np.ndarray
    channels:np.ndarray
    time:float = 0.0

    def __post_init__(self) -> None:
        c = np.array(self.coefficients, dtype=complex)
        if c.ndim != 3 or c.shape[2] != c.shape[0] * c.shape[1]:
            raise DimensionError(f"Pair coefficients of shape {c.shape} are not (d_a, d_b, d_a d_b).")
        m = c.reshape(-1, c.shape[2])
        defect = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1])))
        if defect > UNITARITY_TOLERANCE:
            raise ParameterError(f"Pair channel coefficients are not orthonormal (defect {defect!r}).")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_unitary(cls, U:np.ndarray, dims:Tuple[int, int], channels:np.ndarray|None=None, time:float=0.0) -> "PairSchmidtData":
        """ Coefficients of the pair evolution U in the channel frame (the computational frame if none is given). """
        d = dims[0] * dims[1]
        if U.shape != (d, d):
            raise DimensionError(f"Pair evolution of shape {U.shape} does not act on {dims}.")
        W = np.eye(d, dtype=complex) if channels is None else np.asarray(channels, dtype=complex)
        coefficients = (W.conj().T @ U).T.reshape(dims[0], dims[1], d)
        return cls(coefficients, W, time)

    @property
    def size(self) -> int:
        return self.coefficients.shape[2]

    @property
    def pair_dims(self) -> Tuple[int, int]:
        return self.coefficients.shape[:2] # type: ignore

def instantaneous_schmidt(psi:StateVector, pair:Tuple[int, int], H_pair:SpectralDecomposition, t:float) -> PairSchmidtData:
    """ Evolves the pair at positions `pair` of `psi` for time t and takes its Schmidt frame against the rest of the system. """
    a, b = pair
    dims = (psi.dims[a], psi.dims[b])
    if H_pair.dimension != dims[0] * dims[1]:
        raise DimensionError(f"Pair Hamiltonian of dimension {H_pair.dimension} does not act on {dims}.")
    U = H_pair.unitary(t)
    evolved = StateVector(apply_operator(psi.amplitudes, psi.dims, U, pair), psi.dims)
    rest = tuple(i for i in range(len(psi.dims)) if i not in pair)
    W = schmidt_basis(evolved, (pair, rest)) if rest else np.eye(U.shape[0], dtype=complex)
    trace(DEBUG, "instantaneous_schmidt", f"pair {pair} at t={t}")
    return PairSchmidtData.from_unitary(U, dims, W, t)

def _c(c:FourBodyAmplitudes|np.ndarray) -> np.ndarray:
    return c.c if isinstance(c, FourBodyAmplitudes) else FourBodyAmplitudes(c).c

def merge_amplitudes(c:FourBodyAmplitudes|np.ndarray, s12:PairSchmidtData, s34:PairSchmidtData) -> np.ndarray:
    """ d_pq = sum c_ijkl c^{ij}_p c^{kl}_q """
    c = _c(c)
    if c.shape[:2] != s12.pair_dims or c.shape[2:] != s34.pair_dims:
        raise DimensionError(f"Amplitudes of shape {c.shape} do not fit pairs {s12.pair_dims} and {s34.pair_dims}.")
    return np.einsum("ijkl,ijp,klq->pq", c, s12.coefficients, s34.coefficients)

def merged_state(c:FourBodyAmplitudes|np.ndarray, s12:PairSchmidtData, s34:PairSchmidtData) -> StateVector:
    """ sum_pq d_pq |p>_1 |p>_2 |q>_3 |q>_4 on the channel registers. """
    d = merge_amplitudes(c, s12, s34)
    K12, K34 = d.shape
    psi = np.zeros((K12, K12, K34, K34), dtype=complex)
    p, q = np.indices(d.shape)
    psi[p, p, q, q] = d
    return StateVector(psi.reshape(-1), (K12, K12, K34, K34))

def merged_weights(d:np.ndarray, which:int) -> np.ndarray:
    """ Channel weights of subsystem `which` in the first stage: rows of |d|^2 for 1 and 2, columns for 3 and 4. """
    w = np.abs(d) ** 2
    if which in (1, 2):
        return w.sum(axis=1)
    if which in (3, 4):
        return w.sum(axis=0)
    raise ParameterError(f"Subsystem must be one of 1, 2, 3, 4, got {which}.")

def merged_reduced(c:FourBodyAmplitudes|np.ndarray, s12:PairSchmidtData, s34:PairSchmidtData, which:int) -> DensityMatrix:
    """ Reduced state of a subsystem after the pairs (1, 2) and (3, 4) merged. Subsystems 1 and 2 have the same one. """
    r = merged_weights(merge_amplitudes(c, s12, s34), which)
    return DensityMatrix(np.diag(r).astype(complex), (r.size,))

def channel_weights(d:np.ndarray, s23:PairSchmidtData) -> np.ndarray:
    """ lambda_k = sum_pq |d_pq|^2 |c^{pq}_k|^2 """
    if d.shape != s23.pair_dims:
        raise DimensionError(f"Merge amplitudes of shape {d.shape} do not fit the pair {s23.pair_dims}.")
    return np.einsum("pq,pqk->k", np.abs(d) ** 2, np.abs(s23.coefficients) ** 2)

def restructured_state(d:np.ndarray, s23:PairSchmidtData, U1:np.ndarray, U4:np.ndarray) -> StateVector:
    """ sum_pq d_pq U_1|p>_1 (sum_k c^{pq}_k |k>_2 |k>_3) U_4|q>_4 on the registers. """
    K12, K34 = d.shape
    K23 = s23.size
    if U1.shape != (K12, K12) or U4.shape != (K34, K34):
        raise DimensionError(f"Local evolutions {U1.shape}, {U4.shape} do not act on registers {K12}, {K34}.")
    middle = np.einsum("pq,pqk,ap,bq->akb", d, s23.coefficients, U1, U4)
    psi = np.zeros((K12, K23, K23, K34), dtype=complex)
    k = np.arange(K23)
    psi[:, k, k, :] = middle
    return StateVector(psi.reshape(-1), (K12, K23, K23, K34))

def restructured_reduced(d:np.ndarray, s23:PairSchmidtData, local_hamiltonian:SpectralDecomposition, t1:float, which:int) -> DensityMatrix:
    """ Reduced state after the pair (2, 3) merged while subsystem 1 evolves alone.
    Subsystem 1 keeps the spectrum it had, rotated by its own evolution; subsystem 2 carries the channel weights of the new pair. """
    if which == 1:
        r = merged_weights(d, 1)
        if local_hamiltonian.dimension != r.size:
            raise DimensionError(f"Local Hamiltonian of dimension {local_hamiltonian.dimension} does not act on register {r.size}.")
        U1 = local_hamiltonian.unitary(t1)
        return DensityMatrix((U1 * r) @ U1.conj().T, (r.size,))
    if which == 2:
        lam = channel_weights(d, s23)
        return DensityMatrix(np.diag(lam).astype(complex), (lam.size,))
    raise ParameterError(f"Subsystem must be 1 or 2, got {which}.")

@dataclass(frozen=True, eq=False)
class ReducedState:
    """ A reduced state given by its weights in a local orthonormal basis (columns of `basis`). """
    weights:np.ndarray
    basis:np.ndarray
    density:DensityMatrix

def adapted_amplitudes(c:FourBodyAmplitudes|np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
    """ The amplitudes in the local eigenbases of all four reduced states, and those bases.
    In them every single-subsystem reduced state is diagonal. """
    c = _c(c)
    psi = StateVector(c.reshape(-1), c.shape)
    amplitudes = psi.amplitudes
    bases = []
    for k in range(4):
        _, V = np.linalg.eigh(partial_trace(psi, (k,)).matrix)
        V = V[:, ::-1]
        bases.append(V)
        amplitudes = apply_operator(amplitudes, c.shape, V.conj().T, (k,))
    return amplitudes.reshape(c.shape), tuple(bases)

def initial_reduced(c:FourBodyAmplitudes|np.ndarray, which:int) -> ReducedState:
    """ Reduced state of subsystem `which` (1 to 4) before any merging: weights p_i = sum |c_ijkl|^2 over the other indices,
    taken in the basis which makes the reduced state diagonal. """
    if which not in (1, 2, 3, 4):
        raise ParameterError(f"Subsystem must be one of 1, 2, 3, 4, got {which}.")
    adapted, bases = adapted_amplitudes(c)
    axis = which - 1
    others = tuple(i for i in range(4) if i != axis)
    weights = np.sum(np.abs(adapted) ** 2, axis=others)
    V = bases[axis]
    return ReducedState(weights, V, DensityMatrix((V * weights) @ V.conj().T, (weights.size,)))

@dataclass(frozen=True)
class RestructuringReport:
    """ Normalizations and the largest deviations of the closed forms from partial traces of the explicit states. """
    merge_norm_defect:float
    channel_norm_defect:float
    initial_oracle:float
    merged_oracle:float
    physical_oracle:float
    restructured_oracle:float
    merge_time_independence:float
    spectrum_invariance:float

    def worst_oracle(self) -> float:
        return max(self.initial_oracle, self.merged_oracle, self.physical_oracle, self.restructured_oracle)

@dataclass(frozen=True, eq=False)
class FourBodySystem:
    """ A four-body instance: the amplitudes, the pair Hamiltonians of both merges, and the local Hamiltonians
    of subsystems 1 and 4 on their first-stage registers. """
    amplitudes:FourBodyAmplitudes
    h12:SpectralDecomposition
    h34:SpectralDecomposition
    h23:SpectralDecomposition
    h1:SpectralDecomposition
    h4:SpectralDecomposition

    @classmethod
    def random(cls, rng:np.random.Generator, dims:Sequence[int]=(2, 2, 2, 2)) -> "FourBodySystem":
        d1, d2, d3, d4 = dims
        K12, K34 = d1 * d2, d3 * d4
        return cls(
            amplitudes=FourBodyAmplitudes.of(random_state(rng, dims)),
            h12=spectral_decompose(random_hermitian(rng, K12), (d1, d2)),
            h34=spectral_decompose(random_hermitian(rng, K34), (d3, d4)),
            h23=spectral_decompose(random_hermitian(rng, K12 * K34), (K12, K34)),
            h1=spectral_decompose(random_hermitian(rng, K12)),
            h4=spectral_decompose(random_hermitian(rng, K34)),
        )

    def first_stage(self, t12:float, t34:float) -> Tuple[PairSchmidtData, PairSchmidtData]:
        psi = self.amplitudes.state()
        return (instantaneous_schmidt(psi, (0, 1), self.h12, t12),
                instantaneous_schmidt(psi, (2, 3), self.h34, t34))

    def second_stage(self, s12:PairSchmidtData, s34:PairSchmidtData, t23:float) -> PairSchmidtData:
        return instantaneous_schmidt(merged_state(self.amplitudes, s12, s34), (1, 2), self.h23, t23)

    def report(self, t12:float, t34:float, t23:float, t1:float, t4:float, t34_alternative:float|None=None) -> RestructuringReport:
        """ Runs both restructurings and checks every closed form against the explicit states. """
        c = self.amplitudes
        s12, s34 = self.first_stage(t12, t34)
        d = merge_amplitudes(c, s12, s34)
        s23 = self.second_stage(s12, s34, t23)
        lam = channel_weights(d, s23)

        psi = c.state()
        initial = max(float(np.max(np.abs(initial_reduced(c, k).density.matrix - partial_trace(psi, (k - 1,)).matrix))) for k in (1, 2, 3, 4))

        explicit_i = merged_state(c, s12, s34)
        merged = max(float(np.max(np.abs(merged_reduced(c, s12, s34, k).matrix - partial_trace(explicit_i, (k - 1,)).matrix))) for k in (1, 2, 3, 4))

        # Same reduced pair state, seen in the physical space through the channel frame.
        U = np.kron(self.h12.unitary(t12), self.h34.unitary(t34))
        physical = StateVector(U @ psi.amplitudes, psi.dims)
        rho12 = partial_trace(physical, (0, 1)).matrix
        framed = s12.channels.conj().T @ rho12 @ s12.channels
        physical_dev = float(np.max(np.abs(framed - merged_reduced(c, s12, s34, 1).matrix)))

        explicit_ii = restructured_state(d, s23, self.h1.unitary(t1), self.h4.unitary(t4))
        restructured = max(
            float(np.max(np.abs(restructured_reduced(d, s23, self.h1, t1, 1).matrix - partial_trace(explicit_ii, (0,)).matrix))),
            float(np.max(np.abs(restructured_reduced(d, s23, self.h1, t1, 2).matrix - partial_trace(explicit_ii, (1,)).matrix))),
        )

        if t34_alternative is None:
            t34_alternative = 2 * t34 + 1
        s12_alt, s34_alt = self.first_stage(t12, t34_alternative)
        r = merged_weights(d, 1)
        r_alt = merged_weights(merge_amplitudes(c, s12_alt, s34_alt), 1)

        before = np.sort(r)
        after = np.sort(np.linalg.eigvalsh(restructured_reduced(d, s23, self.h1, t1, 1).matrix))
        trace(DEBUG, "restructuring", f"t12={t12} t34={t34} t23={t23} t1={t1} t4={t4}")
        return RestructuringReport(
            merge_norm_defect=abs(float(np.sum(np.abs(d) ** 2)) - 1),
            channel_norm_defect=abs(float(lam.sum()) - 1),
            initial_oracle=initial,
            merged_oracle=merged,
            physical_oracle=physical_dev,
            restructured_oracle=restructured,
            merge_time_independence=float(np.max(np.abs(r - r_alt))),
            spectrum_invariance=float(np.max(np.abs(before - after))),
        )
