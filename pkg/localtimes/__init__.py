#!/usr/bin/env python3

"""
Numerical toolkit for the Local Time Scheme: small multipartite quantum systems whose approximately isolated blocks evolve by their own local times.

This module is the linear algebra substrate the rest of the package stands on.
It holds immutable `StateVector`, `DensityMatrix` and `SpectralDecomposition` values
and the operations on them: tensor products, partial traces, unitary evolution and Schmidt decompositions.
Everything is dense `numpy`; the total dimension is capped by `MAX_DIMENSION`.
As a starting point, see `spectral_decompose` and `evolve`, then `localtimes.composite`.

Units: hbar = 1, so h = 2 pi and energies are reciprocal times.
"""

from dataclasses import dataclass, field
from functools import singledispatch
from typing import Iterable, Sequence, Set, Tuple
from warnings import warn
import math

import numpy as np

from .misc import debug_channels, trace

__version__ = "1.0"

MAX_DIMENSION:int = 4096
""" Largest total Hilbert space dimension any value may have. """
DEGENERACY_TOLERANCE:float = 1e-9
""" Eigenvalues closer than this are one degenerate level. """
HERMITIAN_TOLERANCE:float = 1e-10
NORM_TOLERANCE:float = 1e-12
POSITIVITY_TOLERANCE:float = 1e-10
PROJECTOR_TOLERANCE:float = 1e-10
SCHMIDT_CUTOFF:float = 1e-14
""" Schmidt coefficients at or below this are dropped from a decomposition. """

DEBUG:Set[str] = debug_channels()
"List all functions which are supposed to have debugging enabled."
#DEBUG.add("spectral_decompose")
#DEBUG.add("schmidt_decompose")
#DEBUG.add("partial_trace")

class LocalTimesError(Exception):
    """ Base of everything this package raises on purpose. """

class DimensionError(LocalTimesError, ValueError):
    """ Shapes do not fit together, or the total dimension exceeds the configured maximum. """

class NotHermitianError(LocalTimesError, ValueError):
    pass

class InvalidStateError(LocalTimesError, ValueError):
    """ A state vector is not normalized or a density matrix is not a density matrix. """

class ParameterError(LocalTimesError, ValueError):
    """ A numerical parameter is outside of its admissible range. """

class ConvergenceError(LocalTimesError, ArithmeticError):
    """ A quadrature or an integrator did not reach the requested accuracy. """

class LocalTimeWarning(UserWarning):
    """ Flags results which are valid but degenerate, such as an infinite bound or a tied comparison. """

SIGMA_X:np.ndarray = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y:np.ndarray = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z:np.ndarray = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2:np.ndarray = np.eye(2, dtype=complex)
for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, IDENTITY_2):
    _m.setflags(write=False)

def _readonly(a:np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a

def _check_dims(dims:Iterable[int], max_dimension:int=MAX_DIMENSION) -> Tuple[Tuple[int, ...], int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) == 0 or any(d < 1 for d in dims):
        raise DimensionError(f"Subsystem dimensions must be positive, got {dims}.")
    total = math.prod(dims)
    if total > max_dimension:
        raise DimensionError(f"Total dimension {total} of {dims} exceeds the maximum {max_dimension}.")
    return dims, total

def _check_subsystems(indices:Iterable[int], n:int, what:str) -> Tuple[int, ...]:
    indices = tuple(int(i) for i in indices)
    if len(set(indices)) != len(indices) or any(i < 0 or i >= n for i in indices):
        raise DimensionError(f"{what} {indices} are not distinct subsystem indices out of {n}.")
    return indices

@dataclass(frozen=True, eq=False)
class StateVector:
    """ A normalized pure state of a composite system. The amplitudes are ordered row-major over `dims`. """

    amplitudes:np.ndarray
    dims:Tuple[int, ...]

    def __post_init__(self) -> None:
        dims, total = _check_dims(self.dims)
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != total:
            raise DimensionError(f"{amplitudes.size} amplitudes do not fit dimensions {dims}.")
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1) > NORM_TOLERANCE:
            raise InvalidStateError(f"State vector norm {norm!r} is not 1.")
        object.__setattr__(self, "amplitudes", _readonly(amplitudes))
        object.__setattr__(self, "dims", dims)

    @classmethod
    def normalized(cls, amplitudes:np.ndarray, dims:Sequence[int]) -> "StateVector":
        amplitudes = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amplitudes)
        if norm == 0:
            raise InvalidStateError("The zero vector cannot be normalized.")
        return cls(amplitudes / norm, tuple(dims))

    @property
    def dimension(self) -> int:
        return self.amplitudes.size

    def tensor(self) -> np.ndarray:
        """ The amplitudes with one axis per subsystem. """
        return self.amplitudes.reshape(self.dims)

    def inner(self, other:"StateVector") -> complex:
        """ <self|other> """
        if self.dims != other.dims:
            raise DimensionError(f"Cannot take inner product of {self.dims} and {other.dims}.")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.dims)

    def __repr__(self) -> str:
        return f"StateVector(dims={self.dims})"

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """ Hermitian, unit trace, positive semidefinite operator. """

    matrix:np.ndarray
    dims:Tuple[int, ...]
    check_positivity:bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        dims, total = _check_dims(self.dims)
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (total, total):
            raise DimensionError(f"Matrix of shape {matrix.shape} does not fit dimensions {dims}.")
        if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > NORM_TOLERANCE:
            raise InvalidStateError("Density matrix is not Hermitian.")
        matrix = 0.5 * (matrix + matrix.conj().T)
        tr = np.trace(matrix).real
        if abs(tr - 1) > NORM_TOLERANCE:
            raise InvalidStateError(f"Density matrix trace {tr!r} is not 1.")
        if self.check_positivity:
            lowest = np.linalg.eigvalsh(matrix)[0]
            if lowest < -POSITIVITY_TOLERANCE:
                raise InvalidStateError(f"Density matrix has negative eigenvalue {lowest!r}.")
        object.__setattr__(self, "matrix", _readonly(matrix))
        object.__setattr__(self, "dims", dims)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def __repr__(self) -> str:
        return f"DensityMatrix(dims={self.dims})"

@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """ The eigen-resolution H = sum_p E_p P_p of a Hermitian operator.

    Levels are sorted ascending and eigenvalues closer than the degeneracy tolerance are clustered into one level.
    The eigenvector matrix `basis` is kept alongside; `levels` holds the energy of each of its columns.
    Projectors are formed on demand, since for large dimensions there may be thousands of them.
    """

    eigenvalues:np.ndarray
    degeneracies:Tuple[int, ...]
    basis:np.ndarray
    dims:Tuple[int, ...]

    def __post_init__(self) -> None:
        eigenvalues = np.array(self.eigenvalues, dtype=float)
        eigenvalues.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "basis", _readonly(self.basis))
        object.__setattr__(self, "degeneracies", tuple(int(g) for g in self.degeneracies))
        assert sum(self.degeneracies) == self.basis.shape[0], f"Degeneracies {self.degeneracies} do not add up to {self.basis.shape[0]}."
        assert np.all(np.diff(eigenvalues) > 0), "Levels are not strictly ascending."

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    @property
    def levels(self) -> np.ndarray:
        """ Energy of every basis column, degenerate levels repeated. """
        return np.repeat(self.eigenvalues, self.degeneracies)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    def projector(self, k:int) -> np.ndarray:
        start = sum(self.degeneracies[:k])
        v = self.basis[:, start:start + self.degeneracies[k]]
        return v @ v.conj().T

    @property
    def projectors(self) -> Tuple[np.ndarray, ...]:
        return tuple(self.projector(k) for k in range(len(self.eigenvalues)))

    def operator(self) -> np.ndarray:
        return (self.basis * self.levels) @ self.basis.conj().T

    def unitary(self, t:float) -> np.ndarray:
        """ exp(-i H t) """
        return (self.basis * np.exp(-1j * self.levels * t)) @ self.basis.conj().T

    def populations(self, psi:StateVector) -> np.ndarray:
        """ Weight of the state in every basis column. """
        self._fits(psi)
        return np.abs(self.basis.conj().T @ psi.amplitudes) ** 2

    def level_populations(self, psi:StateVector) -> np.ndarray:
        """ <psi|P_p|psi> for every level p. """
        pops = self.populations(psi)
        edges = np.cumsum((0,) + self.degeneracies)
        return np.array([pops[a:b].sum() for a, b in zip(edges[:-1], edges[1:])])

    def mean(self, psi:StateVector) -> float:
        return float(self.populations(psi) @ self.levels)

    def variance(self, psi:StateVector) -> float:
        pops = self.populations(psi)
        m = pops @ self.levels
        return float(max(pops @ (self.levels - m) ** 2, 0.0))

    def shifted(self, energy:float) -> "SpectralDecomposition":
        """ The same operator plus `energy` times identity. """
        return SpectralDecomposition(self.eigenvalues + energy, self.degeneracies, self.basis, self.dims)

    def _fits(self, psi:StateVector) -> None:
        if psi.dimension != self.dimension:
            raise DimensionError(f"State of dimension {psi.dimension} does not fit operator of dimension {self.dimension}.")

def check_hermitian(H:np.ndarray, tol:float=HERMITIAN_TOLERANCE, what:str="Operator") -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"{what} of shape {H.shape} is not square.")
    deviation = np.max(np.abs(H - H.conj().T), initial=0.0)
    if deviation > tol:
        raise NotHermitianError(f"{what} deviates from its adjoint by {deviation!r}.")
    return H

def spectral_decompose(H:np.ndarray, dims:Sequence[int]|None=None, tol:float=DEGENERACY_TOLERANCE) -> SpectralDecomposition:
    """ Diagonalizes a Hermitian matrix and clusters its eigenvalues into levels.
    Neighbouring sorted eigenvalues closer than `tol` chain into one level whose energy is their mean. """
    H = check_hermitian(H)
    if dims is None:
        dims = (H.shape[0],)
    dims, total = _check_dims(dims)
    if total != H.shape[0]:
        raise DimensionError(f"Operator of dimension {H.shape[0]} does not fit {dims}.")
    values, vectors = np.linalg.eigh(0.5 * (H + H.conj().T))
    breaks = np.flatnonzero(np.diff(values) > tol) + 1
    clusters = np.split(values, breaks)
    eigenvalues = np.array([c.mean() for c in clusters])
    degeneracies = tuple(len(c) for c in clusters)
    trace(DEBUG, "spectral_decompose", f"{len(eigenvalues)} levels with degeneracies {degeneracies}")
    return SpectralDecomposition(eigenvalues, degeneracies, vectors, dims)

def evolve(psi:StateVector, H:SpectralDecomposition, t:float) -> StateVector:
    """ Applies sum_p exp(-i E_p t) P_p to the state. """
    H._fits(psi)
    coefficients = H.basis.conj().T @ psi.amplitudes
    amplitudes = H.basis @ (np.exp(-1j * H.levels * t) * coefficients)
    return StateVector(amplitudes, psi.dims)

def unitary(H:SpectralDecomposition, t:float) -> np.ndarray:
    return H.unitary(t)

@singledispatch
def tensor_product(a, b, max_dimension:int=MAX_DIMENSION):
    """ Kronecker product of two operators, states or density matrices; the subsystem dimensions are concatenated. """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[0] * b.shape[0] > max_dimension:
        raise DimensionError(f"Product dimension {a.shape[0] * b.shape[0]} exceeds the maximum {max_dimension}.")
    return np.kron(a, b)

@tensor_product.register
def _(a:StateVector, b:StateVector, max_dimension:int=MAX_DIMENSION) -> StateVector:
    dims, _ = _check_dims(a.dims + b.dims, max_dimension)
    return StateVector(np.kron(a.amplitudes, b.amplitudes), dims)

@tensor_product.register
def _(a:DensityMatrix, b:DensityMatrix, max_dimension:int=MAX_DIMENSION) -> DensityMatrix:
    dims, _ = _check_dims(a.dims + b.dims, max_dimension)
    return DensityMatrix(np.kron(a.matrix, b.matrix), dims, check_positivity=False)

def _split_keep(keep:Iterable[int], n:int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    keep = tuple(sorted(_check_subsystems(keep, n, "Kept subsystems")))
    if len(keep) == 0 or len(keep) == n:
        raise DimensionError(f"Kept subsystems {keep} must be a nonempty proper subset of {n} subsystems.")
    return keep, tuple(i for i in range(n) if i not in keep)

@singledispatch
def partial_trace(rho, keep:Iterable[int]) -> DensityMatrix:
    """ Traces out every subsystem not listed in `keep`. Subsystems are addressed by position. """
    raise TypeError(f"Cannot take partial trace of {type(rho)}.")

@partial_trace.register
def _(rho:DensityMatrix, keep:Iterable[int]) -> DensityMatrix:
    n = len(rho.dims)
    keep, gone = _split_keep(keep, n)
    dk = math.prod(rho.dims[i] for i in keep)
    dg = math.prod(rho.dims[i] for i in gone)
    order = keep + gone
    t = rho.matrix.reshape(rho.dims + rho.dims).transpose(order + tuple(n + i for i in order))
    reduced = np.einsum("ajbj->ab", t.reshape(dk, dg, dk, dg))
    trace(DEBUG, "partial_trace", f"{rho.dims} -> keep {keep}")
    return DensityMatrix(reduced, tuple(rho.dims[i] for i in keep))

@partial_trace.register
def _(psi:StateVector, keep:Iterable[int]) -> DensityMatrix:
    n = len(psi.dims)
    keep, gone = _split_keep(keep, n)
    dk = math.prod(psi.dims[i] for i in keep)
    m = psi.tensor().transpose(keep + gone).reshape(dk, -1)
    trace(DEBUG, "partial_trace", f"{psi.dims} -> keep {keep} from amplitudes")
    return DensityMatrix(m @ m.conj().T, tuple(psi.dims[i] for i in keep))

def _bipartition(cut:Sequence[Sequence[int]], n:int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    if len(cut) != 2:
        raise DimensionError(f"A cut needs exactly two blocks, got {len(cut)}.")
    left = _check_subsystems(cut[0], n, "Left block")
    right = _check_subsystems(cut[1], n, "Right block")
    if not left or not right or set(left) & set(right) or len(left) + len(right) != n:
        raise DimensionError(f"Cut {cut} is not a bipartition of {n} subsystems.")
    return left, right

def _cut_matrix(psi:StateVector, cut:Sequence[Sequence[int]]) -> Tuple[np.ndarray, Tuple[int, ...], Tuple[int, ...]]:
    left, right = _bipartition(cut, len(psi.dims))
    dl = math.prod(psi.dims[i] for i in left)
    return psi.tensor().transpose(left + right).reshape(dl, -1), left, right

@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    """ psi = sum_k s_k |u_k> (x) |v_k> across the cut (left, right). """
    coefficients:np.ndarray
    left:Tuple[StateVector, ...]
    right:Tuple[StateVector, ...]
    cut:Tuple[Tuple[int, ...], Tuple[int, ...]]

    def reconstruct(self) -> StateVector:
        """ The decomposed state, subsystems back in their original order. """
        left, right = self.cut
        joint = sum(s * np.kron(u.amplitudes, v.amplitudes) for s, u, v in zip(self.coefficients, self.left, self.right))
        dims_in_cut_order = self.left[0].dims + self.right[0].dims
        order = left + right
        back = np.argsort(order)
        amplitudes = np.asarray(joint).reshape(dims_in_cut_order).transpose(back).reshape(-1)
        dims = tuple(dims_in_cut_order[i] for i in back)
        return StateVector.normalized(amplitudes, dims)

def schmidt_decompose(psi:StateVector, cut:Sequence[Sequence[int]], cutoff:float=SCHMIDT_CUTOFF) -> SchmidtDecomposition:
    """ Singular value decomposition of the amplitude matrix across a bipartite cut. """
    m, left, right = _cut_matrix(psi, cut)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    rank = max(1, int(np.count_nonzero(s > cutoff)))
    ldims = tuple(psi.dims[i] for i in left)
    rdims = tuple(psi.dims[i] for i in right)
    trace(DEBUG, "schmidt_decompose", f"cut {left}|{right} rank {rank}")
    return SchmidtDecomposition(
        coefficients=s[:rank].copy(),
        left=tuple(StateVector.normalized(u[:, k], ldims) for k in range(rank)),
        right=tuple(StateVector.normalized(vh[k, :], rdims) for k in range(rank)),
        cut=(left, right),
    )

def schmidt_basis(psi:StateVector, cut:Sequence[Sequence[int]]) -> np.ndarray:
    """ Complete orthonormal basis of the left block, columns ordered by descending Schmidt coefficient.
    Columns beyond the Schmidt rank complete the basis arbitrarily. """
    m, _, _ = _cut_matrix(psi, cut)
    u, _, _ = np.linalg.svd(m, full_matrices=True)
    return u

def entanglement_entropy(psi:StateVector, cut:Sequence[Sequence[int]]) -> float:
    """ Von Neumann entropy of either side of the cut, in nats. """
    m, _, _ = _cut_matrix(psi, cut)
    w = np.linalg.svd(m, compute_uv=False) ** 2
    w = w[w > 0]
    return float(-(w @ np.log(w)))

def embed_operator(op:np.ndarray, targets:Sequence[int], dims:Sequence[int]) -> np.ndarray:
    """ Lifts an operator on the listed subsystems (in the listed order) to the whole space. """
    dims, total = _check_dims(dims)
    n = len(dims)
    targets = _check_subsystems(targets, n, "Targets")
    rest = tuple(i for i in range(n) if i not in targets)
    dt = math.prod(dims[i] for i in targets)
    op = np.asarray(op, dtype=complex)
    if op.shape != (dt, dt):
        raise DimensionError(f"Operator of shape {op.shape} does not act on subsystems {targets} of {dims}.")
    order = targets + rest
    full = np.kron(op, np.eye(total // dt))
    shape = tuple(dims[i] for i in order)
    back = tuple(np.argsort(order))
    return full.reshape(shape + shape).transpose(back + tuple(n + i for i in back)).reshape(total, total)

def apply_operator(amplitudes:np.ndarray, dims:Sequence[int], op:np.ndarray, targets:Sequence[int]) -> np.ndarray:
    """ Applies an operator acting on `targets` to raw amplitudes without forming the full matrix. """
    dims = tuple(dims)
    targets = _check_subsystems(targets, len(dims), "Targets")
    k = len(targets)
    tdims = tuple(dims[i] for i in targets)
    op = np.asarray(op, dtype=complex)
    if op.shape != (math.prod(tdims),) * 2:
        raise DimensionError(f"Operator of shape {op.shape} does not act on subsystems {targets} of {dims}.")
    t = np.asarray(amplitudes, dtype=complex).reshape(dims)
    out = np.tensordot(op.reshape(tdims + tdims), t, axes=(tuple(range(k, 2 * k)), targets))
    return np.moveaxis(out, tuple(range(k)), targets).reshape(-1)

def expectation(psi:StateVector, op:np.ndarray, targets:Sequence[int]|None=None) -> complex:
    if targets is None:
        targets = tuple(range(len(psi.dims)))
    return complex(np.vdot(psi.amplitudes, apply_operator(psi.amplitudes, psi.dims, op, targets)))

def fidelity(a:StateVector, b:StateVector) -> float:
    """ |<a|b>|, the overlap modulus of two pure states. """
    return abs(a.inner(b))

def thermal_state(H:SpectralDecomposition, beta:float) -> DensityMatrix:
    weights = np.exp(-beta * (H.levels - H.ground_energy))
    weights /= weights.sum()
    return DensityMatrix((H.basis * weights) @ H.basis.conj().T, H.dims)

def basis_state(dims:Sequence[int], index:int|Sequence[int]) -> StateVector:
    dims, total = _check_dims(dims)
    flat = index if isinstance(index, (int, np.integer)) else int(np.ravel_multi_index(tuple(index), dims))
    amplitudes = np.zeros(total, dtype=complex)
    amplitudes[flat] = 1
    return StateVector(amplitudes, dims)

def random_state(rng:np.random.Generator, dims:Sequence[int]) -> StateVector:
    """ Haar distributed pure state. """
    _, total = _check_dims(dims)
    return StateVector.normalized(rng.standard_normal(total) + 1j * rng.standard_normal(total), dims)

def random_hermitian(rng:np.random.Generator, d:int, scale:float=1.0) -> np.ndarray:
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (a + a.conj().T)

def random_unitary(rng:np.random.Generator, d:int) -> np.ndarray:
    """ Haar distributed unitary: QR of a Ginibre matrix with the phases of R divided out. """
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases

def warn_flagged(message:str) -> None:
    warn(message, LocalTimeWarning, stacklevel=3)
