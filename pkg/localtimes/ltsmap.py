"""
The fundamental map: a pure state evolved to a local time which is not sharp but spread by a truncated Gaussian over a window around t0.

    sigma(t0) = integral over [t0 - dt, t0 + dt] of rho(t) |psi(t)><psi(t)| dt

The map dephases coherences between distinct energies and leaves everything diagonal in energy alone.
"""

from dataclasses import dataclass
from functools import singledispatch
from typing import Set
import math

import numpy as np
from scipy import special, stats

from . import (ConvergenceError, DensityMatrix, DimensionError, ParameterError, SpectralDecomposition, StateVector,
        thermal_state, warn_flagged)
from .misc import debug_channels, gauss_legendre, trace

DEFAULT_NODES:int = 64
CONVERGENCE_TOLERANCE:float = 1e-8
""" Largest change of the map under doubling the nodes which still counts as converged. """

DEBUG:Set[str] = debug_channels()
#DEBUG.add("sigma_map")
#DEBUG.add("tau_min")

@dataclass(frozen=True)
class TimeWindow:
    """ Local time window: centre t0, half width, and the spread of the Gaussian truncated to the window.

    The constructor checks only that the three numbers are positive. Whether the half width stays below the
    orthogonalization bound of a state, and whether the states at the two edges still overlap, depends on the
    state and the Hamiltonian; `for_system` checks both.
    """
    t0:float
    half_width:float
    sigma:float|None = None

    def __post_init__(self) -> None:
        if not self.t0 > 0:
            raise ParameterError(f"Window centre must be positive, got {self.t0}.")
        if not self.half_width > 0:
            raise ParameterError(f"Window half width must be positive, got {self.half_width}.")
        if self.sigma is None:
            object.__setattr__(self, "sigma", self.half_width / 3)
        if not self.sigma > 0: # type: ignore
            raise ParameterError(f"Window spread must be positive, got {self.sigma}.")

    @property
    def lower(self) -> float:
        return self.t0 - self.half_width

    @property
    def upper(self) -> float:
        return self.t0 + self.half_width

    def distribution(self):
        """ The truncated Gaussian as a frozen `scipy.stats` distribution. """
        bound = self.half_width / self.sigma # type: ignore
        return stats.truncnorm(-bound, bound, loc=self.t0, scale=self.sigma)

    @classmethod
    def for_system(cls, H:SpectralDecomposition, psi:StateVector, t0:float, half_width:float, sigma:float|None=None) -> "TimeWindow":
        """ A window which is admissible for the given state: narrower than the orthogonalization bound and with overlapping edges. """
        window = cls(t0, half_width, sigma)
        bound = tau_min(H, psi)
        if not half_width < bound:
            raise ParameterError(f"Half width {half_width} is not below the orthogonalization bound {bound}.")
        if not window_overlap(psi, H, window) > 0:
            raise ParameterError("The states at the window edges are orthogonal.")
        return window

def tau_min(H:SpectralDecomposition, psi:StateVector) -> float:
    """ The lower bound on the time to reach an orthogonal state, max(pi / (2 dH), pi / (2 (<H> - E_g))).
    A vanishing variance or excess makes its term infinite. """
    mean = H.mean(psi)
    std = math.sqrt(H.variance(psi))
    excess = max(mean - H.ground_energy, 0.0)
    if std == 0 and excess == 0:
        raise ParameterError("The state is a ground eigenstate; it never becomes orthogonal to itself.")
    terms = [math.pi / (2 * x) if x > 0 else math.inf for x in (std, excess)]
    bound = max(terms)
    if math.isinf(bound):
        warn_flagged(f"Orthogonalization bound is infinite (std {std}, excess {excess}).")
    trace(DEBUG, "tau_min", f"std {std} excess {excess} -> {bound}")
    return bound

def window_overlap(psi:StateVector, H:SpectralDecomposition, window:TimeWindow) -> float:
    """ |<psi(t0 + dt)|psi(t0 - dt)>|, which does not depend on t0. """
    pops = H.populations(psi)
    return float(abs(pops @ np.exp(2j * H.levels * window.half_width)))

def window_characteristic(window:TimeWindow, omega:float|np.ndarray) -> complex|np.ndarray:
    """ Closed form of the integral of rho(t) exp(-i omega t) over the window.
    The coherence between energies E and E' is multiplied by this at omega = E - E'. """
    s = window.sigma
    dt = window.half_width
    z = (dt + 1j * np.asarray(omega) * s ** 2) / (s * math.sqrt(2))
    value = np.exp(-0.5 * (s * np.asarray(omega)) ** 2) * special.erf(z).real / special.erf(dt / (s * math.sqrt(2)))
    return value * np.exp(-1j * np.asarray(omega) * window.t0)

def _damping(levels:np.ndarray, window:TimeWindow, n_nodes:int) -> np.ndarray:
    """ W[m, n] = sum_k w_k exp(-i (E_m - E_n) t_k) with the window density renormalized on the nodes. """
    t, w = gauss_legendre(n_nodes, window.lower, window.upper)
    weights = window.distribution().pdf(t) * w
    weights /= weights.sum()
    phases = np.exp(-1j * np.outer(levels, t))
    return (phases * weights) @ phases.conj().T

def _sigma(rho_energy:np.ndarray, H:SpectralDecomposition, window:TimeWindow, n_nodes:int, tolerance:float) -> np.ndarray:
    coarse = _damping(H.levels, window, n_nodes)
    fine = _damping(H.levels, window, 2 * n_nodes)
    change = float(np.max(np.abs((coarse - fine) * rho_energy), initial=0.0))
    trace(DEBUG, "sigma_map", f"{n_nodes} -> {2 * n_nodes} nodes changed the map by {change}")
    if change > tolerance:
        raise ConvergenceError(f"Local time quadrature with {n_nodes} nodes changed by {change} under doubling.")
    return H.basis @ (rho_energy * fine) @ H.basis.conj().T

@singledispatch
def sigma_map(psi0, H:SpectralDecomposition, window:TimeWindow, n_nodes:int=DEFAULT_NODES, tolerance:float=CONVERGENCE_TOLERANCE) -> DensityMatrix:
    """ The state at local time t0: the window average of the evolved projector. """
    raise TypeError(f"Cannot map {type(psi0)}.")

@sigma_map.register
def _(psi0:StateVector, H:SpectralDecomposition, window:TimeWindow, n_nodes:int=DEFAULT_NODES, tolerance:float=CONVERGENCE_TOLERANCE) -> DensityMatrix:
    H._fits(psi0)
    c = H.basis.conj().T @ psi0.amplitudes
    return DensityMatrix(_sigma(np.outer(c, c.conj()), H, window, n_nodes, tolerance), psi0.dims)

@sigma_map.register
def _(rho0:DensityMatrix, H:SpectralDecomposition, window:TimeWindow, n_nodes:int=DEFAULT_NODES, tolerance:float=CONVERGENCE_TOLERANCE) -> DensityMatrix:
    # Linear in the input, so the eigen-mixture can be mapped as a whole.
    if rho0.dimension != H.dimension:
        raise DimensionError(f"Density matrix of dimension {rho0.dimension} does not fit operator of dimension {H.dimension}.")
    rho_energy = H.basis.conj().T @ rho0.matrix @ H.basis
    return DensityMatrix(_sigma(rho_energy, H, window, n_nodes, tolerance), rho0.dims)

def sample_local_time(rng:np.random.Generator, window:TimeWindow) -> float:
    """ One draw of a local time from the window density. """
    return float(window.distribution().rvs(random_state=rng))

@dataclass(frozen=True)
class InvarianceReport:
    """ Defects of the quantities the map must conserve. All should vanish to rounding. """
    trace_defect:float
    energy_drift:float
    projector_drift:float
    thermal_drift:float

    def worst(self) -> float:
        return max(self.trace_defect, self.energy_drift, self.projector_drift, self.thermal_drift)

def invariance_report(psi0:StateVector, H:SpectralDecomposition, window:TimeWindow, beta:float=1.0, n_nodes:int=DEFAULT_NODES) -> InvarianceReport:
    sigma = sigma_map(psi0, H, window, n_nodes)
    operator = H.operator()
    energy_before = H.mean(psi0)
    energy_after = float(np.real(np.trace(operator @ sigma.matrix)))
    before = H.level_populations(psi0)
    after = np.array([np.real(np.trace(P @ sigma.matrix)) for P in H.projectors])
    thermal = thermal_state(H, beta)
    thermal_after = sigma_map(thermal, H, window, n_nodes)
    return InvarianceReport(
        trace_defect=abs(float(np.real(np.trace(sigma.matrix))) - 1),
        energy_drift=abs(energy_after - energy_before),
        projector_drift=float(np.max(np.abs(after - before))),
        thermal_drift=float(np.max(np.abs(thermal_after.matrix - thermal.matrix))),
    )
