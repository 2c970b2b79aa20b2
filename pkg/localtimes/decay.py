"""
Nonexponential decay. A decaying system's local time runs at the rate kappa(t) = P(t) / Q(t) against the laboratory clock,
so its survival probability is exp(-lambda * integral_0^t kappa) instead of exp(-lambda t).

The canonical rate is P = a t + b t^2, Q = 1 + p t + b t^2 with 4 b > p^2.
It starts quadratic, is close to exponential at intermediate times and ends with a power-law factor.
"""

from dataclasses import dataclass
from typing import Set
import math

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate, special

from . import ConvergenceError, ParameterError
from .misc import debug_channels, trace

ODE_RTOL:float = 1e-13
QUADRATURE_RTOL:float = 1e-13
QUADRATURE_SPLIT:float = 1.0
""" Local times above this are integrated as t minus the deficit 1 - kappa. """

DEBUG:Set[str] = debug_channels()
#DEBUG.add("decay_chain_ode")
#DEBUG.add("local_time_quadrature")

@dataclass(frozen=True, eq=False)
class RationalClockRate:
    """ kappa(t) = P(t) / Q(t), coefficients in ascending powers.
    `a`, `b`, `p` are set for the canonical form and None otherwise. """
    numerator:np.ndarray
    denominator:np.ndarray
    a:float|None = None
    b:float|None = None
    p:float|None = None

    def __post_init__(self) -> None:
        num = np.trim_zeros(np.asarray(self.numerator, dtype=float), "b")
        den = np.trim_zeros(np.asarray(self.denominator, dtype=float), "b")
        if num.size == 0 or den.size == 0:
            raise ParameterError("Clock rate polynomials must not vanish.")
        if np.any(num < 0) or np.any(den < 0):
            raise ParameterError("Clock rate coefficients must be nonnegative.")
        if num.size != den.size or num[-1] != den[-1]:
            raise ParameterError("Clock rate polynomials must have the same degree and leading coefficient.")
        if not den[0] > 0:
            raise ParameterError("The clock rate denominator must be positive at t = 0.")
        if self.is_canonical:
            if not (self.a > 0 and self.b > 0 and self.p >= 0): # type: ignore
                raise ParameterError(f"Canonical clock needs a > 0, b > 0, p >= 0, got a={self.a}, b={self.b}, p={self.p}.")
            if not 4 * self.b > self.p ** 2: # type: ignore
                raise ParameterError(f"Canonical clock needs 4 b > p^2, got b={self.b}, p={self.p}.")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    @classmethod
    def canonical(cls, a:float, b:float, p:float) -> "RationalClockRate":
        """ P = a t + b t^2, Q = 1 + p t + b t^2 """
        if not 4 * b > p ** 2:
            raise ParameterError(f"Canonical clock needs 4 b > p^2, got b={b}, p={p}.")
        return cls(np.array([0.0, a, b]), np.array([1.0, p, b]), float(a), float(b), float(p))

    @classmethod
    def unit(cls) -> "RationalClockRate":
        """ kappa = 1: local time is laboratory time. """
        return cls(np.array([1.0]), np.array([1.0]))

    @property
    def is_canonical(self) -> bool:
        return self.a is not None

    @property
    def is_unit(self) -> bool:
        return self.numerator.size == 1

    @property
    def discriminant_root(self) -> float:
        """ sqrt(4 b - p^2) """
        assert self.is_canonical, "Only the canonical clock has a discriminant."
        return math.sqrt(4 * self.b - self.p ** 2) # type: ignore

@dataclass(frozen=True, eq=False)
class DecaySpecies:
    """ A population decaying at `rate` per unit of its own local time. A zero rate is a stable species. """
    rate:float
    clock:RationalClockRate
    initial:float = 1.0

    def __post_init__(self) -> None:
        if not self.rate >= 0:
            raise ParameterError(f"Decay rate must be nonnegative, got {self.rate}.")
        if self.initial < 0:
            raise ParameterError(f"Initial population must be nonnegative, got {self.initial}.")

def kappa(rate:RationalClockRate, t:float|np.ndarray) -> float|np.ndarray:
    return P.polyval(t, rate.numerator) / P.polyval(t, rate.denominator)

def _canonical_local_time(rate:RationalClockRate, t:np.ndarray) -> np.ndarray:
    # Closed antiderivative taken from 0; the arctan difference and log1p keep small t accurate.
    a, b, p = rate.a, rate.b, rate.p
    s = rate.discriminant_root
    u0 = p / s # type: ignore
    ut = (p + 2 * b * t) / s # type: ignore
    darctan = np.arctan((2 * b * t / s) / (1 + ut * u0)) # type: ignore
    k = (p ** 2 - a * p - 2 * b) / (b * s) # type: ignore
    return t + k * darctan + (a - p) / (2 * b) * np.log1p(p * t + b * t ** 2) # type: ignore

def _quad(f, lower:float, upper:float) -> float:
    """ Adaptive quadrature on geometrically growing segments of [lower, upper]. """
    if upper <= lower:
        return 0.0
    start = max(lower, upper * 1e-8)
    edges = np.unique(np.concatenate(([lower], np.geomspace(start, upper, 24))))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        value, error = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=QUADRATURE_RTOL, limit=200)
        if not math.isfinite(value) or error > 1e-6 * max(abs(value), 1e-300):
            raise ConvergenceError(f"Quadrature on [{lo}, {hi}] did not converge (estimate {value}, error {error}).")
        total += value
    return total

def local_time_quadrature(rate:RationalClockRate, t:float) -> float:
    """ integral_0^t kappa, by quadrature. Beyond the split point the deficit 1 - kappa is integrated instead. """
    if t < 0:
        raise ParameterError(f"Local time is defined for t >= 0, got {t}.")
    head = min(t, QUADRATURE_SPLIT)
    value = _quad(lambda s: kappa(rate, s), 0.0, head)
    if t > QUADRATURE_SPLIT:
        value += (t - QUADRATURE_SPLIT) - _quad(lambda s: 1 - kappa(rate, s), QUADRATURE_SPLIT, t)
    trace(DEBUG, "local_time_quadrature", f"t={t} -> {value}")
    return value

def local_time(rate:RationalClockRate, t:float|np.ndarray) -> float|np.ndarray:
    """ The local time elapsed at laboratory time t, integral_0^t kappa. """
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ParameterError("Local time is defined for t >= 0.")
    if rate.is_unit:
        out = arr.copy()
    elif rate.is_canonical:
        out = _canonical_local_time(rate, arr)
    else:
        out = np.vectorize(lambda x: local_time_quadrature(rate, float(x)), otypes=[float])(arr)
    return float(out) if out.ndim == 0 else out

def survival(species:DecaySpecies, t:float|np.ndarray) -> float|np.ndarray:
    """ p(t) = exp(-lambda integral_0^t kappa) """
    return np.exp(-species.rate * local_time(species.clock, t))

def decay_probability(species:DecaySpecies, t:float|np.ndarray) -> float|np.ndarray:
    """ 1 - p(t), accurate where it is tiny. """
    return -np.expm1(-species.rate * local_time(species.clock, t))

def short_time_prefactor(rate:float, a:float, b:float, p:float) -> float:
    """ C = exp(lambda mu), mu = (2 b + a p - p^2) arctan(p / sqrt(4 b - p^2)) / (b sqrt(4 b - p^2)).
    It is the short-time prefactor when the antiderivative is taken without its value at 0. """
    if not 4 * b > p ** 2 or not b > 0:
        raise ParameterError(f"Need b > 0 and 4 b > p^2, got b={b}, p={p}.")
    return math.exp(rate * _mu(a, b, p))

def _mu(a:float, b:float, p:float) -> float:
    s = math.sqrt(4 * b - p ** 2)
    return (2 * b + a * p - p ** 2) * math.atan(p / s) / (b * s)

@dataclass(frozen=True)
class LongTimeFactors:
    """ p(t) split as exponential * arctangent * power-law factors; the last decays like t^-exponent. """
    exponential:np.ndarray
    arctangent:np.ndarray
    power_law:np.ndarray
    exponent:float

def long_time_factors(species:DecaySpecies, t:float|np.ndarray) -> LongTimeFactors:
    clock = species.clock
    if not clock.is_canonical:
        raise ParameterError("Long-time factors are defined for the canonical clock.")
    a, b, p, lam = clock.a, clock.b, clock.p, species.rate
    s = clock.discriminant_root
    t = np.asarray(t, dtype=float)
    ut = (p + 2 * b * t) / s # type: ignore
    darctan = np.arctan((2 * b * t / s) / (1 + ut * p / s)) # type: ignore
    k = (p ** 2 - a * p - 2 * b) / (b * s) # type: ignore
    return LongTimeFactors(
        exponential=np.exp(-lam * t),
        arctangent=np.exp(-lam * k * darctan),
        power_law=np.exp(-lam * (a - p) / (2 * b) * np.log1p(p * t + b * t ** 2)), # type: ignore
        exponent=lam * (a - p) / b, # type: ignore
    )

@dataclass(frozen=True)
class ChainSolution:
    t:np.ndarray
    mother:np.ndarray
    daughter:np.ndarray

def decay_chain_ode(A:DecaySpecies, B:DecaySpecies, t_grid:np.ndarray) -> ChainSolution:
    """ Integrates dN_A/dt = -lA kA N_A, dN_B/dt = lA kA N_A - lB kB N_B from t = 0 with an eighth order Runge-Kutta method. """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise ParameterError("The time grid must be nonnegative and strictly increasing.")

    def rhs(t, y):
        outflow = A.rate * kappa(A.clock, t) * y[0]
        return [-outflow, outflow - B.rate * kappa(B.clock, t) * y[1]]

    scale = max(A.initial, B.initial, 1e-300)
    if t_grid[-1] == 0:
        return ChainSolution(t_grid, np.array([A.initial]), np.array([B.initial]))
    sol = integrate.solve_ivp(rhs, (0.0, t_grid[-1]), [A.initial, B.initial], method="DOP853", t_eval=t_grid,
            rtol=ODE_RTOL, atol=1e-22 * scale)
    if not sol.success:
        raise ConvergenceError(f"Decay chain integration failed: {sol.message}")
    trace(DEBUG, "decay_chain_ode", f"{sol.nfev} evaluations up to t={t_grid[-1]}")
    return ChainSolution(t_grid, sol.y[0], sol.y[1])

def _chain_factor(xa:np.ndarray, xb:np.ndarray) -> np.ndarray:
    """ (exp(-xa) - exp(-xb)) / (xb - xa), continuous through xa = xb. """
    delta = xb - xa
    near = np.abs(delta) <= 1
    safe = np.where(near, 1.0, delta)
    far = (np.exp(-xa) - np.exp(-xb)) / safe
    return np.where(near, np.exp(-xa) * special.exprel(-np.where(near, delta, 0.0)), far)

def decay_chain_closed_form(A:DecaySpecies, B:DecaySpecies, t:float|np.ndarray) -> ChainSolution:
    """ The chain solution built from the two local times alone:
    N_B = N_A(0) xA (exp(-xA) - exp(-xB)) / (xB - xA), x = lambda integral_0^t kappa.
    It solves the chain exactly when both clocks run alike and is an approximation otherwise. """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    xa = A.rate * np.asarray(local_time(A.clock, t))
    xb = B.rate * np.asarray(local_time(B.clock, t))
    mother = A.initial * np.exp(-xa)
    daughter = A.initial * xa * _chain_factor(xa, xb) + B.initial * np.exp(-xb)
    return ChainSolution(t, mother, daughter)

def standard_chain(rate_a:float, rate_b:float, initial:float, t:float|np.ndarray) -> np.ndarray:
    """ N_B = N_A(0) lA / (lB - lA) (exp(-lA t) - exp(-lB t)), and N_A(0) l t exp(-l t) for equal rates. """
    t = np.asarray(t, dtype=float)
    if rate_a != rate_b:
        return initial * rate_a / (rate_b - rate_a) * (np.exp(-rate_a * t) - np.exp(-rate_b * t))
    return initial * rate_a * t * np.exp(-rate_a * t)

def short_time_chain_standard(rate_a:float, initial:float, t:float|np.ndarray) -> float|np.ndarray:
    """ Leading order daughter growth with constant rates, lA N_A(0) t. """
    return rate_a * initial * np.asarray(t, dtype=float)

def short_time_chain_expansion(A:DecaySpecies, B:DecaySpecies, t:float|np.ndarray) -> np.ndarray:
    """ The short-time chain law with the per-species constants mu and C of the canonical clocks:

        N_B ~ N_A(0) lA (muA - aA t^2 / 2) / (lB (muB - aB t^2 / 2) - lA (muA - aA t^2 / 2)) [1 - (CA aA lA - CB aB lB) t^2 / 2]
    """
    if not (A.clock.is_canonical and B.clock.is_canonical):
        raise ParameterError("The short-time chain law needs canonical clocks for both species.")
    t = np.asarray(t, dtype=float)
    ca, cb = A.clock, B.clock
    mu_a = _mu(ca.a, ca.b, ca.p) # type: ignore
    mu_b = _mu(cb.a, cb.b, cb.p) # type: ignore
    big_c_a = short_time_prefactor(A.rate, ca.a, ca.b, ca.p) # type: ignore
    big_c_b = short_time_prefactor(B.rate, cb.a, cb.b, cb.p) # type: ignore
    xa = mu_a - ca.a * t ** 2 / 2 # type: ignore
    xb = mu_b - cb.a * t ** 2 / 2 # type: ignore
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = A.initial * A.rate * xa / (B.rate * xb - A.rate * xa)
    return ratio * (1 - 0.5 * (big_c_a * ca.a * A.rate - big_c_b * cb.a * B.rate) * t ** 2) # type: ignore

@dataclass(frozen=True)
class DeviationReport:
    """ The local-time closed form against the integrated chain, pointwise. """
    t:np.ndarray
    closed_form:np.ndarray
    integrated:np.ndarray

    @property
    def absolute(self) -> np.ndarray:
        return np.abs(self.closed_form - self.integrated)

    @property
    def relative(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.integrated != 0, self.absolute / np.abs(self.integrated), np.where(self.absolute == 0, 0.0, np.inf))

    @property
    def worst_relative(self) -> float:
        return float(np.max(self.relative))

def chain_deviation_report(A:DecaySpecies, B:DecaySpecies, t_grid:np.ndarray) -> DeviationReport:
    """ Compares the daughter populations; nothing is asserted about their agreement. """
    closed = decay_chain_closed_form(A, B, t_grid)
    ode = decay_chain_ode(A, B, t_grid)
    return DeviationReport(ode.t, closed.daughter, ode.daughter)

def short_time_exponent(species:DecaySpecies, t_low:float=1e-4, t_high:float=1e-2, n:int=50) -> float:
    """ Slope of log(1 - p) against log t on a logarithmic grid. """
    if not species.rate > 0:
        raise ParameterError("A stable species has no short-time decay exponent.")
    t = np.geomspace(t_low, t_high, n)
    slope, _ = np.polyfit(np.log(t), np.log(decay_probability(species, t)), 1)
    return float(slope)

def time_grid(t_max:float, n:int) -> np.ndarray:
    if not t_max > 0 or n < 2:
        raise ParameterError(f"Need a positive horizon and at least two points, got {t_max} and {n}.")
    return np.linspace(0, t_max, n)
