"""
Macroscopic distinguishability and individuality of a multi-time state, and the orthogonal-transition time bounds.

    S = <psi(t)|psi(t')> = sum |c|^2 exp(-i sum_i E_i dt_i)
    I = (1/d) sum exp(-i sum_i E_i dt_i) prod_i g_i

with dt_i = t'_i - t_i the per-block offsets. `S` depends on the state, `I` only on the spectra.
"""

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Set, Tuple
import math

import numpy as np
from scipy import integrate, optimize

from . import (DimensionError, ParameterError, SpectralDecomposition, StateVector, apply_operator, random_state,
        warn_flagged)
from .misc import debug_channels, trace

PLANCK:float = 2 * math.pi
""" h in units of hbar. """
DENSITY_NORMALIZATION_TOLERANCE:float = 1e-8
ORTHOGONALITY_TOLERANCE:float = 1e-10
MIN_MOMENT_SAMPLES:int = 10000

DEBUG:Set[str] = debug_channels()
#DEBUG.add("orthogonalization_time")
#DEBUG.add("haar_shell_moments")

@dataclass(frozen=True, eq=False)
class BlockSpectrum:
    """ The distinct energies of a block and their degeneracies. """
    energies:np.ndarray
    degeneracies:np.ndarray

    def __post_init__(self) -> None:
        energies = np.asarray(self.energies, dtype=float).reshape(-1)
        degeneracies = np.asarray(self.degeneracies, dtype=int).reshape(-1)
        if energies.size == 0 or energies.size != degeneracies.size:
            raise DimensionError(f"{energies.size} energies do not match {degeneracies.size} degeneracies.")
        if np.any(degeneracies < 1):
            raise ParameterError(f"Degeneracies must be positive, got {degeneracies}.")
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "degeneracies", degeneracies)

    @classmethod
    def nondegenerate(cls, energies:Iterable[float]) -> "BlockSpectrum":
        energies = np.asarray(list(energies), dtype=float)
        return cls(energies, np.ones(energies.size, dtype=int))

    @property
    def dimension(self) -> int:
        return int(self.degeneracies.sum())

    def levels(self) -> np.ndarray:
        """ One energy per basis vector. """
        return np.repeat(self.energies, self.degeneracies)

@dataclass(frozen=True, eq=False)
class BlockSpectra:
    blocks:Tuple[BlockSpectrum, ...]

    def __post_init__(self) -> None:
        if len(self.blocks) == 0:
            raise DimensionError("At least one block spectrum is needed.")
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @classmethod
    def of(cls, decompositions:Iterable[SpectralDecomposition]) -> "BlockSpectra":
        return cls(tuple(BlockSpectrum(d.eigenvalues, np.asarray(d.degeneracies)) for d in decompositions))

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(b.dimension for b in self.blocks)

    @property
    def dimension(self) -> int:
        return math.prod(self.dims)

    def __len__(self) -> int:
        return len(self.blocks)

    def total_phase(self, offsets:Sequence[float]) -> np.ndarray:
        """ sum_i E_i dt_i on the product grid of basis vectors. """
        offsets = _check_offsets(self, offsets)
        return reduce(np.add.outer, [b.levels() * dt for b, dt in zip(self.blocks, offsets)])

def _check_offsets(blocks:BlockSpectra, offsets:Sequence[float]) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=float).reshape(-1)
    if offsets.size != len(blocks):
        raise DimensionError(f"{offsets.size} time offsets given for {len(blocks)} blocks.")
    return offsets

def to_energy_basis(psi:StateVector, decompositions:Sequence[SpectralDecomposition]) -> Tuple[StateVector, BlockSpectra]:
    """ Re-expresses a state whose i-th subsystem is the i-th block in the product of the blocks' eigenbases. """
    if psi.dims != tuple(d.dimension for d in decompositions):
        raise DimensionError(f"State dimensions {psi.dims} do not match the blocks {[d.dimension for d in decompositions]}.")
    amplitudes = psi.amplitudes
    for k, d in enumerate(decompositions):
        amplitudes = apply_operator(amplitudes, psi.dims, d.basis.conj().T, (k,))
    return StateVector(amplitudes, psi.dims), BlockSpectra.of(decompositions)

def overlap_S(psi:StateVector, blocks:BlockSpectra, offsets:Sequence[float]) -> complex:
    """ Overlap of the state with itself at times shifted blockwise by `offsets`. `psi` is given in the product energy eigenbasis. """
    if psi.dims != blocks.dims:
        raise DimensionError(f"State dimensions {psi.dims} do not match the block spectra {blocks.dims}.")
    weights = np.abs(psi.tensor()) ** 2
    return complex(np.sum(weights * np.exp(-1j * blocks.total_phase(offsets))))

def overlap_uniform_density(r:float) -> float:
    """ |S| for a total phase spread uniformly over [0, r]: sqrt(2 (1 - cos r)) / r, written as |2 sin(r / 2) / r| so that r -> 0 stays exact. """
    if r < 0:
        raise ParameterError(f"Phase range must be nonnegative, got {r}.")
    return float(abs(np.sinc(r / (2 * math.pi))))

def overlap_density(x:np.ndarray, p:np.ndarray, method:str="trapezoid") -> complex:
    """ integral of p(x) exp(-i x) dx for a tabulated phase density. """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.shape != p.shape or x.ndim != 1 or x.size < 2:
        raise DimensionError(f"Grid of shape {x.shape} does not match density of shape {p.shape}.")
    if np.any(p < 0):
        raise ParameterError("Phase density must be nonnegative.")
    rule = {"trapezoid": integrate.trapezoid, "simpson": integrate.simpson}.get(method)
    if rule is None:
        raise ParameterError(f"Unknown quadrature method {method!r}.")
    norm = rule(p, x=x)
    if abs(norm - 1) > DENSITY_NORMALIZATION_TOLERANCE:
        raise ParameterError(f"Phase density integrates to {norm!r}, not 1.")
    return complex(rule(p * np.cos(x), x=x) - 1j * rule(p * np.sin(x), x=x))

def individuality_I(blocks:BlockSpectra, offsets:Sequence[float]) -> complex:
    """ The state-independent part of the overlap: the normalized trace of U(t)^dagger U(t') over the product of blocks. """
    offsets = _check_offsets(blocks, offsets)
    terms = [b.degeneracies * np.exp(-1j * b.energies * dt) for b, dt in zip(blocks.blocks, offsets)]
    return complex(np.sum(reduce(np.multiply.outer, terms)) / blocks.dimension)

def orthogonal_time_bound(excess:Sequence[float]) -> float:
    """ h / (4 sum_i (<H_i> - E_ig)): the shortest time in which N blocks can jointly reach an orthogonal state. """
    excess = np.asarray(excess, dtype=float).reshape(-1)
    if excess.size == 0 or np.any(excess < 0):
        raise ParameterError(f"Excess energies must be nonnegative, got {excess}.")
    total = excess.sum()
    if total == 0:
        raise ParameterError("All excess energies vanish; the bound is undefined.")
    return PLANCK / (4 * total)

def margolus_bound(excess:float, std:float) -> float:
    """ max(h / (4 (<H> - E_g)), h / (4 dH)). A vanishing argument makes its term infinite. """
    if excess < 0 or std < 0:
        raise ParameterError(f"Excess energy {excess} and spread {std} must be nonnegative.")
    if excess == 0 and std == 0:
        raise ParameterError("Both the excess energy and the spread vanish; the bound is undefined.")
    bound = max(PLANCK / (4 * x) if x > 0 else math.inf for x in (excess, std))
    if math.isinf(bound):
        warn_flagged(f"Orthogonalization bound diverges (excess {excess}, spread {std}).")
    return bound

def survival_amplitude(psi:StateVector, H:SpectralDecomposition, t:float|np.ndarray) -> complex|np.ndarray:
    """ <psi|exp(-i H t)|psi> """
    pops = H.populations(psi)
    return np.exp(-1j * np.multiply.outer(np.asarray(t, dtype=float), H.levels)) @ pops

def orthogonalization_time(psi:StateVector, H:SpectralDecomposition, t_max:float, n_grid:int=2000,
        tolerance:float=ORTHOGONALITY_TOLERANCE) -> float|None:
    """ The first time at which the state becomes orthogonal to itself, or None if it does not before `t_max`.
    Local minima of |<psi|psi(t)>|^2 on a grid are refined in order by bounded Brent search. """
    if not t_max > 0 or n_grid < 3:
        raise ParameterError(f"Need a positive horizon and at least three grid points, got {t_max} and {n_grid}.")
    grid = np.linspace(0, t_max, n_grid)
    values = np.abs(survival_amplitude(psi, H, grid)) ** 2
    candidates = np.flatnonzero((values[1:-1] <= values[:-2]) & (values[1:-1] <= values[2:])) + 1
    for k in candidates:
        res = optimize.minimize_scalar(lambda t: abs(survival_amplitude(psi, H, t)) ** 2,
                bounds=(grid[k - 1], grid[k + 1]), method="bounded", options={"xatol": 1e-12})
        trace(DEBUG, "orthogonalization_time", f"minimum {res.fun} at {res.x}")
        if res.fun <= tolerance:
            return float(res.x)
    return None

@dataclass(frozen=True)
class MomentReport:
    """ Pooled power sums of x = |c_0|^2 over Haar random states of dimension N, with derived moments and standard errors. """
    N:int
    n:int
    s1:float
    s2:float
    s3:float
    s4:float

    def merge(self, other:"MomentReport") -> "MomentReport":
        """ Pools the samples of an independent stream. """
        if other.N != self.N:
            raise DimensionError(f"Cannot pool moments of dimension {self.N} and {other.N}.")
        return MomentReport(self.N, self.n + other.n, self.s1 + other.s1, self.s2 + other.s2, self.s3 + other.s3, self.s4 + other.s4)

    @property
    def mean_c2(self) -> float:
        return self.s1 / self.n

    @property
    def mean_c4(self) -> float:
        return self.s2 / self.n

    @property
    def std_c2(self) -> float:
        return math.sqrt(max(self.mean_c4 - self.mean_c2 ** 2, 0.0))

    @property
    def se_mean_c2(self) -> float:
        return self.std_c2 / math.sqrt(self.n)

    @property
    def se_mean_c4(self) -> float:
        return math.sqrt(max(self.s4 / self.n - self.mean_c4 ** 2, 0.0) / self.n)

    @property
    def se_std_c2(self) -> float:
        m1, m2, m3, m4 = (s / self.n for s in (self.s1, self.s2, self.s3, self.s4))
        central4 = m4 - 4 * m3 * m1 + 6 * m2 * m1 ** 2 - 3 * m1 ** 4
        var = self.std_c2 ** 2
        return math.sqrt(max(central4 - var ** 2, 0.0) / self.n) / (2 * self.std_c2)

    @property
    def target_c2(self) -> float:
        return 1 / self.N

    @property
    def target_c4(self) -> float:
        return 2 / (self.N * (self.N + 1))

    @property
    def target_std_c2(self) -> float:
        return math.sqrt((self.N - 1) / (self.N ** 2 * (self.N + 1)))

    def deviations(self) -> Tuple[float, float, float]:
        """ Distance of each estimate from its target, in standard errors. """
        return (abs(self.mean_c2 - self.target_c2) / self.se_mean_c2,
                abs(self.mean_c4 - self.target_c4) / self.se_mean_c4,
                abs(self.std_c2 - self.target_std_c2) / self.se_std_c2)

def haar_shell_moments(rng:np.random.Generator, N:int, n_samples:int, chunk:int=10000) -> MomentReport:
    """ Samples normalized complex Gaussian vectors in dimension N and accumulates the power sums of |c_0|^2. """
    if N < 2 or n_samples < MIN_MOMENT_SAMPLES:
        raise ParameterError(f"Need N >= 2 and at least {MIN_MOMENT_SAMPLES} samples, got {N} and {n_samples}.")
    report = MomentReport(N, 0, 0.0, 0.0, 0.0, 0.0)
    left = n_samples
    while left > 0:
        m = min(chunk, left)
        z = rng.standard_normal((m, N)) + 1j * rng.standard_normal((m, N))
        x = np.abs(z[:, 0]) ** 2 / np.sum(np.abs(z) ** 2, axis=1)
        report = report.merge(MomentReport(N, m, x.sum(), (x ** 2).sum(), (x ** 3).sum(), (x ** 4).sum()))
        left -= m
    trace(DEBUG, "haar_shell_moments", f"N={N}: {report.mean_c2}, {report.mean_c4}, {report.std_c2}")
    return report

def golden_overlap_configuration(omega_1:float=1.0, omega_2:float=1.0) -> Tuple[StateVector, BlockSpectra, Tuple[float, float]]:
    """ A five-qubit block with levels {+-5/2, +-3/2, +-1/2} omega_1 and a two-qubit block with levels {0, +-omega_2},
    uniformly populated, compared at the offsets pi / (5 omega_1) and pi / (2 omega_2). """
    if not omega_1 > 0 or not omega_2 > 0:
        raise ParameterError(f"Frequencies must be positive, got {omega_1} and {omega_2}.")
    blocks = BlockSpectra((
        BlockSpectrum.nondegenerate(np.array([-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]) * omega_1),
        BlockSpectrum.nondegenerate(np.array([-1.0, 0.0, 1.0]) * omega_2),
    ))
    psi = StateVector(np.full(18, 1 / math.sqrt(18)), blocks.dims)
    return psi, blocks, (math.pi / (5 * omega_1), math.pi / (2 * omega_2))

def golden_overlap(omega_1:float=1.0, omega_2:float=1.0) -> float:
    """ |S|^2 of `golden_overlap_configuration`, about 0.0292. """
    psi, blocks, offsets = golden_overlap_configuration(omega_1, omega_2)
    return abs(overlap_S(psi, blocks, offsets)) ** 2

def median_overlap_modulus(rng:np.random.Generator, n_blocks:int, n_levels:int=4, n_samples:int=200,
        energy_range:float=4.0, offset_range:float=math.pi) -> float:
    """ Median |S| over random block spectra, random states and random offsets; it falls as blocks are added. """
    if n_blocks < 1 or n_levels < 1 or n_samples < 1:
        raise ParameterError("Blocks, levels and samples must be positive.")
    values = []
    for _ in range(n_samples):
        blocks = BlockSpectra(tuple(BlockSpectrum.nondegenerate(rng.uniform(0, energy_range, n_levels)) for _ in range(n_blocks)))
        psi = random_state(rng, blocks.dims)
        offsets = rng.uniform(0, offset_range, n_blocks)
        values.append(abs(overlap_S(psi, blocks, offsets)))
    return float(np.median(values))
