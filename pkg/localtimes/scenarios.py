"""
Declarative scenarios: a YAML file names sections, each section is one run of one kind with a flat parameter map.
Every kind checks its parameters before anything is computed and answers with rows of the result table.

    scenarios = load_config(path)
    results = run_all(scenarios, out_dir, seed=0, threads=4)

A scenario's random stream depends only on the seed and its name, so the rows do not depend on the order or the
threads the scenarios run in.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Sequence, Set, Tuple
import math

import numpy as np
import yaml

from . import ConvergenceError, LocalTimesError, StateVector, __version__, random_state, spectral_decompose
from . import composite, decay, ltsmap, metrics, reduced, reversibility
from .export.table import Row, export
from .misc import debug_channels, stream_entropy, stream_for, trace

DEBUG:Set[str] = debug_channels()
#DEBUG.add("load_config")
#DEBUG.add("run_scenario")

GOLDEN_CONFIG:Path = Path(__file__).parent / "golden.yaml"
RESERVED_KEYS:Tuple[str, ...] = ("kind", "seed", "output", "expected", "tolerance", "golden")

EXIT_OK:int = 0
EXIT_GOLDEN_MISS:int = 1
EXIT_PARSE:int = 2
EXIT_VALIDATION:int = 3
EXIT_CONVERGENCE:int = 4

class ScenarioError(LocalTimesError):
    exit_code:int = EXIT_VALIDATION

class ScenarioParseError(ScenarioError):
    """ The file is not YAML, or not a mapping of sections. """
    exit_code = EXIT_PARSE

class ScenarioValidationError(ScenarioError):
    """ A section names an unknown kind or carries a parameter its kind cannot use. """
    exit_code = EXIT_VALIDATION

REQUIRED = object()

@dataclass(frozen=True)
class Parameter:
    name:str
    type:str
    default:Any = REQUIRED
    help:str = ""

    @property
    def required(self) -> bool:
        return self.default is REQUIRED

@dataclass(frozen=True)
class Scenario:
    name:str
    kind:str
    parameters:Mapping[str, Any]
    raw:Mapping[str, Any] = field(repr=False)
    seed:int|None = None
    output:str|None = None
    expected:float|None = None
    tolerance:float|None = None
    golden:bool = False

@dataclass(frozen=True)
class ScenarioKind:
    name:str
    anchor:str
    primary:str
    """ The quantity a scenario's `expected` value is checked against. """
    parameters:Tuple[Parameter, ...]
    runner:Callable[[Scenario, np.random.Generator], List[Row]]

    def parameter(self, name:str) -> Parameter:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

@dataclass(frozen=True)
class ScenarioResult:
    scenario:Scenario
    rows:Tuple[Row, ...]
    paths:Tuple[Path, ...]

    @property
    def failed(self) -> Tuple[Row, ...]:
        return tuple(r for r in self.rows if r.failed)

# Parameter value types. Each converter gets the raw YAML value and the directory of the config file.

def _float(value, base:Path) -> float:
    if isinstance(value, bool):
        raise TypeError(f"expected a number, got {value!r}")
    return float(value)

def _optional_float(value, base:Path) -> float|None:
    return None if value is None else _float(value, base)

def _int(value, base:Path) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"expected an integer, got {value!r}")
    return value

def _str(value, base:Path) -> str:
    if not isinstance(value, str):
        raise TypeError(f"expected a string, got {value!r}")
    return value

def _floats(value, base:Path) -> np.ndarray:
    if not isinstance(value, list):
        raise TypeError(f"expected a list of numbers, got {value!r}")
    return np.array([_float(v, base) for v in value])

def _ints(value, base:Path) -> Tuple[int, ...]:
    if not isinstance(value, list):
        raise TypeError(f"expected a list of integers, got {value!r}")
    return tuple(_int(v, base) for v in value)

def _nested_floats(value, base:Path) -> Tuple[np.ndarray, ...]:
    if not isinstance(value, list) or not value:
        raise TypeError(f"expected a nonempty list of lists of numbers, got {value!r}")
    return tuple(_floats(v, base) for v in value)

def _complex_entries(value) -> np.ndarray:
    return np.array([complex(str(x).replace(" ", "")) if isinstance(x, str) else complex(x) for x in value], dtype=complex)

def _load_csv(value:str, base:Path) -> np.ndarray:
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    if not path.exists():
        raise FileNotFoundError(f"no such file {path}")
    return np.atleast_1d(np.loadtxt(path, dtype=complex, delimiter=","))

def _matrix(value, base:Path) -> np.ndarray:
    """ A row-major nested list, complex entries as strings like "1+2j", or a CSV file path. """
    if isinstance(value, str):
        m = _load_csv(value, base)
    elif isinstance(value, list) and value and all(isinstance(row, list) for row in value):
        m = np.array([_complex_entries(row) for row in value])
    else:
        raise TypeError("expected a nested list or a CSV path")
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m

def _vector(value, base:Path) -> np.ndarray|str:
    """ A list of amplitudes, a CSV file path, or the word `random`. """
    if value == "random":
        return "random"
    if isinstance(value, str):
        v = _load_csv(value, base).reshape(-1)
    elif isinstance(value, list):
        v = _complex_entries(value)
    else:
        raise TypeError("expected a list of amplitudes, a CSV path or 'random'")
    return v

def _pair_terms(value, base:Path) -> Tuple[Tuple[Tuple[int, int], np.ndarray], ...]:
    if not isinstance(value, list):
        raise TypeError("expected a list of {between: [i, j], matrix: ...}")
    out = []
    for term in value:
        if not isinstance(term, dict) or set(term) != {"between", "matrix"}:
            raise TypeError(f"pair term {term!r} must have exactly the keys between and matrix")
        between = _ints(term["between"], base)
        if len(between) != 2:
            raise ValueError(f"pair term between {between} does not name two subsystems")
        out.append(((between[0], between[1]), _matrix(term["matrix"], base)))
    return tuple(out)

def _self_terms(value, base:Path) -> Tuple[np.ndarray|None, ...]:
    if not isinstance(value, list):
        raise TypeError("expected a list with one matrix (or null) per subsystem")
    return tuple(None if m is None else _matrix(m, base) for m in value)

def _partitions(value, base:Path) -> Tuple[Tuple[Tuple[int, ...], ...], ...]:
    if not isinstance(value, list) or not value:
        raise TypeError("expected a nonempty list of partitions, each a list of blocks of subsystem indices")
    return tuple(tuple(_ints(block, base) for block in partition) for partition in value)

def _labels(value, base:Path) -> Tuple[str, ...]:
    return tuple(_str(value, base).split())

def _choice(*options:str) -> Callable[[Any, Path], str]:
    def convert(value, base:Path) -> str:
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {value!r}")
        return value
    convert.__name__ = "|".join(options)
    return convert

CONVERTERS:Dict[str, Callable[[Any, Path], Any]] = {
    "float": _float,
    "float?": _optional_float,
    "int": _int,
    "str": _str,
    "floats": _floats,
    "ints": _ints,
    "spectra": _nested_floats,
    "matrix": _matrix,
    "vector": _vector,
    "self-terms": _self_terms,
    "pair-terms": _pair_terms,
    "partitions": _partitions,
    "labels": _labels,
}

def _converter(type_name:str) -> Callable[[Any, Path], Any]:
    if type_name.startswith("choice:"):
        return _choice(*type_name[len("choice:"):].split("|"))
    return CONVERTERS[type_name]

def _state(value:np.ndarray|str, dims:Sequence[int], rng:np.random.Generator) -> StateVector:
    """ Configured amplitudes are normalized; `random` draws a Haar random state from the scenario's stream. """
    if isinstance(value, str):
        return random_state(rng, dims)
    return StateVector.normalized(value, dims)

# Kinds.

def _run_sigma_map(s:Scenario, rng:np.random.Generator) -> List[Row]:
    q = s.parameters
    H = spectral_decompose(q["hamiltonian"])
    psi = _state(q["state"], (H.dimension,), rng)
    window = ltsmap.TimeWindow(q["t0"], q["half_width"], q["sigma"])
    report = ltsmap.invariance_report(psi, H, window, beta=q["beta"], n_nodes=q["nodes"])
    sigma = ltsmap.sigma_map(psi, H, window, n_nodes=q["nodes"])
    tol = q["invariance_tolerance"]
    return [
        Row.bound("trace_defect", report.trace_defect, tol),
        Row.bound("energy_drift", report.energy_drift, tol),
        Row.bound("projector_drift", report.projector_drift, tol),
        Row.bound("thermal_drift", report.thermal_drift, tol, parameter=q["beta"]),
        Row("purity", sigma.purity()),
        Row("window_overlap", ltsmap.window_overlap(psi, H, window), parameter=q["half_width"]),
        Row("tau_min", ltsmap.tau_min(H, psi)),
    ]

def _block_spectra(energies:Tuple[np.ndarray, ...]) -> metrics.BlockSpectra:
    return metrics.BlockSpectra(tuple(metrics.BlockSpectrum.nondegenerate(e) for e in energies))

def _run_overlap(s:Scenario, rng:np.random.Generator) -> List[Row]:
    q = s.parameters
    if q["mode"] == "uniform-density":
        r = q["r"]
        if not r > 0:
            raise ScenarioValidationError(f"{s.name}: parameter 'r' must be positive, got {r}.")
        x = np.linspace(0.0, r, q["points"])
        closed = metrics.overlap_uniform_density(r)
        tabulated = abs(metrics.overlap_density(x, np.full_like(x, 1 / r), method="simpson"))
        return [
            Row("abs_S", closed, parameter=r),
            Row("abs_S_tabulated", tabulated, parameter=r),
            Row.bound("quadrature_deviation", abs(closed - tabulated), q["quadrature_tolerance"], parameter=r),
        ]
    if q["block_energies"] is None or q["offsets"] is None:
        raise ScenarioValidationError(f"{s.name}: the spectrum mode needs 'block_energies' and 'offsets'.")
    blocks = _block_spectra(q["block_energies"])
    if q["state"] is None:
        psi = StateVector(np.full(blocks.dimension, 1 / math.sqrt(blocks.dimension)), blocks.dims)
    else:
        psi = _state(q["state"], blocks.dims, rng)
    S = metrics.overlap_S(psi, blocks, q["offsets"])
    return [Row("re_S", S.real), Row("im_S", S.imag), Row("abs_S", abs(S)), Row("abs_S2", abs(S) ** 2)]

def _run_individuality(s:Scenario, rng:np.random.Generator) -> List[Row]:
    q = s.parameters
    blocks = _block_spectra(q["block_energies"])
    I = metrics.individuality_I(blocks, q["offsets"])
    uniform = StateVector(np.full(blocks.dimension, 1 / math.sqrt(blocks.dimension)), blocks.dims)
    S = metrics.overlap_S(uniform, blocks, q["offsets"])
    return [
        Row("re_I", I.real), Row("im_I", I.imag), Row("abs_I", abs(I)),
        Row.bound("uniform_state_deviation", abs(S - I), 1e-10),
    ]

def _run_bounds(s:Scenario, rng:np.random.Generator) -> List[Row]:
    q = s.parameters
    H = spectral_decompose(q["hamiltonian"])
    psi = _state(q["state"], (H.dimension,), rng)
    excess = max(H.mean(psi) - H.ground_energy, 0.0)
    std = math.sqrt(H.variance(psi))
    tau = ltsmap.tau_min(H, psi)
    rows = [Row("excess", excess), Row("spread", std), Row("tau_min", tau), Row("margolus_bound", metrics.margolus_bound(excess, std))]
    t_max = q["t_max"] if q["t_max"] is not None else 4 * tau
    if not math.isfinite(t_max):
        raise ScenarioValidationError(f"{s.name}: the bound is infinite; give 't_max'.")
    found = metrics.orthogonalization_time(psi, H, t_max, n_grid=q["grid"])
    rows.append(Row("orthogonalization_time", math.nan if found is None else found, parameter=t_max))
    if q["block_excess"] is not None:
        excesses = q["block_excess"]
        for n in range(1, excesses.size + 1):
            rows.append(Row("orthogonal_time_bound", metrics.orthogonal_time_bound(excesses[:n]), parameter=n))
    return rows

def _run_moments(s:Scenario, rng:np.random.Generator) -> List[Row]:
    q = s.parameters
    report = metrics.haar_shell_moments(rng, q["N"], q["samples"])
    k = q["standard_errors"]
    return [
        Row.check("mean_c2", report.mean_c2, report.target_c2, k * report.se_mean_c2, parameter=q["N"]),
        Row.check("mean_c4", report.mean_c4, report.target_c4, k * report.se_mean_c4, parameter=q["N"]),
        Row.check("std_c2", report.std_c2, report.target_std_c2, k * report.se_std_c2, parameter=q["N"]),
    ]

def _run_golden_overlap(s:Scenario, rng:np.random.Generator) -> List[Row]:
    q = s.parameters
    return [Row("abs_S2", metrics.golden_overlap(q["omega_1"], q["omega_2"]))]

def trajectory_system(s:Scenario, seed:int=0) -> Tuple[composite.CompositeHamiltonian, StateVector, float]:
    """ The composite Hamiltonian, initial state and isolation threshold of a scenario with subsystem parameters.
    A `random` state is drawn from the same stream `run_scenario` would use, so `seed` only counts when the scenario has none. """
    return _composite_system(s, stream_for(resolve_seed(s, seed), s.name))[:2] + (s.parameters["epsilon"],)

def _composite_system(s:Scenario, rng:np.random.Generator) -> Tuple[composite.CompositeHamiltonian, StateVector]:
    q = s.parameters
    dims = q["dims"]
    if q["self_terms"] is not None and len(q["self_terms"]) != len(dims):
        raise ScenarioValidationError(f"{s.name}: parameter 'self_terms' needs one entry per subsystem, got {len(q['self_terms'])} for {len(dims)}.")
    selfs = {k: m for k, m in enumerate(q["self_terms"] or ()) if m is not None}
    pairs = {between: m for between, m in q["pair_terms"] or ()}
    H = composite.CompositeHamiltonian(tuple(enumerate(dims)), selfs, pairs)
    return H, _state(q["state"], dims, rng)

def _run_trajectory(s:Scenario, rng:np.random.Generator) -> List[Row]:
    q = s.parameters
    H, psi = _composite_system(s, rng)
    traj = composite.Trajectory.start(H, psi)
    rows:List[Row] = []
    for k in range(q["steps"]):
        traj = composite.restructure(traj, rng, epsilon=q["epsilon"], t0=q["t0"], half_width=q["half_width"])
        step = traj.steps[-1]
        rows.append(Row("blocks", len(step.partition), parameter=k))
        for block in step.partition:
            rows.append(Row("local_time", step.times.time_of(block), parameter=f"{k}:{'+'.join(map(str, H.ordered(block)))}"))
    detected = composite.detect_partition(psi, H, q["epsilon"])
    trivial = composite.Partition.trivial(H)
    if detected != trivial:
        decision = composite.compare_factorizations(psi, H, detected, trivial, horizon=q["horizon"])
        rows.append(Row("fidelity_detected", decision.fidelity_a))
        rows.append(Row("fidelity_trivial", decision.fidelity_b))
    rows.append(Row.bound("replay_deviation", traj.replay(), composite.REPLAY_TOLERANCE))
    rows.append(Row.bound("norm_defect", abs(float(np.linalg.norm(traj.state.amplitudes)) - 1), 1e-12))
    return rows

def _run_reversibility(s:Scenario, rng:np.random.Generator) -> List[Row]:
    q = s.parameters
    if q["mode"] == "table":
        if q["labels"] is None or q["table"] is None:
            raise ScenarioValidationError(f"{s.name}: the table mode needs 'labels' and 'table'.")
        T = reversibility.TransitionTable(tuple(q["labels"]), q["table"].real)
        return [Row("relative_entropy", reversibility.relative_entropy(T)),
                Row("detailed_balance", float(reversibility.detailed_balance(T)))]
    if q["mode"] == "redistribution":
        before = reversibility.time_tuple_distribution(
                [ltsmap.TimeWindow(q["t0"], q["half_width"])] * q["blocks_before"], q["bins"])
        after = reversibility.time_tuple_distribution(
                [ltsmap.TimeWindow(q["t0_after"] or q["t0"], q["half_width_after"] or q["half_width"])] * q["blocks_after"], q["bins"])
        T = reversibility.redistribution_table(before, after)
        return [Row.bound("relative_entropy", reversibility.relative_entropy(T), reversibility.PROBABILITY_TOLERANCE),
                Row("detailed_balance", float(reversibility.detailed_balance(T))),
                Row("labels", len(T.labels))]
    if q["partitions"] is None or q["dims"] is None:
        raise ScenarioValidationError(f"{s.name}: the demo mode needs 'dims' and 'partitions'.")
    H, psi = _composite_system(s, rng)
    sequence = [composite.Partition.of(H, p) for p in q["partitions"]]
    demo = reversibility.plain_irreversibility_demo(psi, H, sequence, rng, n_trials=q["trials"], t0=q["t0"], half_width=q["half_width"])
    return [
        Row("mean_fidelity", demo.mean, parameter=q["trials"]),
        Row("returned_trials", demo.returned(), parameter=q["trials"]),
        Row.check("control_fidelity", float(np.min(demo.control_fidelities)), 1.0, 1e-10),
    ]

def _run_decay(s:Scenario, rng:np.random.Generator) -> List[Row]:
    q = s.parameters

    def clock(a, b, p):
        return decay.RationalClockRate.unit() if q["clock"] == "unit" else decay.RationalClockRate.canonical(a, b, p)

    mother = decay.DecaySpecies(q["rate"], clock(q["a"], q["b"], q["p"]), q["initial"])
    daughter = decay.DecaySpecies(q["daughter_rate"],
            clock(q["daughter_a"] or q["a"], q["daughter_b"] or q["b"], q["daughter_p"] if q["daughter_p"] is not None else q["p"]), 0.0)
    t = decay.time_grid(q["t_max"], q["points"])
    closed = decay.decay_chain_closed_form(mother, daughter, t)
    report = decay.chain_deviation_report(mother, daughter, t)
    rows:List[Row] = []
    for ti, pa, nb, nb_ode in zip(t, closed.mother, closed.daughter, report.integrated):
        rows.append(Row("survival", pa, parameter=ti))
        rows.append(Row("daughter", nb, parameter=ti))
        rows.append(Row("daughter_integrated", nb_ode, parameter=ti))
    rows.append(Row("worst_relative_deviation", report.worst_relative))
    if daughter.rate == 0:
        ode = decay.decay_chain_ode(mother, daughter, t)
        rows.append(Row.bound("mass_balance_defect", float(np.max(np.abs(ode.mother + ode.daughter - mother.initial))), 1e-9))
    if q["clock"] == "unit":
        standard = decay.standard_chain(mother.rate, daughter.rate, mother.initial, t)
        scale = np.maximum(np.abs(standard), np.finfo(float).tiny)
        rows.append(Row.bound("standard_chain_deviation", float(np.max(np.abs(closed.daughter - standard) / scale)), 1e-10))
        rows.append(Row.bound("integrated_standard_deviation", float(np.max(np.abs(report.integrated - standard) / scale)), 1e-10))
    else:
        rows.append(Row("short_time_exponent", decay.short_time_exponent(mother, q["t_low"], q["t_high"])))
        rows.append(Row("long_time_exponent", decay.long_time_factors(mother, q["t_max"]).exponent))
        rows.append(Row("short_time_prefactor", decay.short_time_prefactor(mother.rate, q["a"], q["b"], q["p"])))
    return rows

def _run_reduced_dynamics(s:Scenario, rng:np.random.Generator) -> List[Row]:
    q = s.parameters
    if len(q["dims"]) != 4:
        raise ScenarioValidationError(f"{s.name}: parameter 'dims' must list four subsystems, got {q['dims']}.")
    reports = [reduced.FourBodySystem.random(rng, q["dims"]).report(q["t12"], q["t34"], q["t23"], q["t1"], q["t4"], q["t34_alternative"])
            for _ in range(q["instances"])]
    tol = q["oracle_tolerance"]

    def worst(name:str) -> float:
        return max(getattr(r, name) for r in reports)

    return [
        Row.bound("worst_oracle", max(r.worst_oracle() for r in reports), tol, parameter=q["instances"]),
        Row.bound("merge_norm_defect", worst("merge_norm_defect"), tol),
        Row.bound("channel_norm_defect", worst("channel_norm_defect"), tol),
        Row.bound("merge_time_independence", worst("merge_time_independence"), 1e-12),
        Row.bound("spectrum_invariance", worst("spectrum_invariance"), tol),
    ]

_SYSTEM = (
    Parameter("dims", "ints", help="subsystem dimensions; subsystem ids are their positions"),
    Parameter("self_terms", "self-terms", None, "one matrix or null per subsystem"),
    Parameter("pair_terms", "pair-terms", None, "list of {between: [i, j], matrix}"),
    Parameter("state", "vector", "random", "initial amplitudes"),
)

CATALOG:Dict[str, ScenarioKind] = {k.name: k for k in (
    ScenarioKind("sigma-map", "local-time averaging of a single block", "purity", (
        Parameter("hamiltonian", "matrix"),
        Parameter("state", "vector", "random"),
        Parameter("t0", "float", 1.0),
        Parameter("half_width", "float"),
        Parameter("sigma", "float?", None, "defaults to half_width / 3"),
        Parameter("beta", "float", 1.0, "inverse temperature of the thermal check"),
        Parameter("nodes", "int", ltsmap.DEFAULT_NODES),
        Parameter("invariance_tolerance", "float", 1e-10),
    ), _run_sigma_map),
    ScenarioKind("overlap", "multi-time self-overlap", "abs_S", (
        Parameter("mode", "choice:spectrum|uniform-density", "spectrum"),
        Parameter("block_energies", "spectra", None, "spectrum mode: nondegenerate levels per block"),
        Parameter("offsets", "floats", None, "spectrum mode: time offset per block"),
        Parameter("state", "vector", None, "spectrum mode: amplitudes in the product eigenbasis, uniform by default"),
        Parameter("r", "float", 10.0, "uniform-density mode: width of the phase range"),
        Parameter("points", "int", 2001),
        Parameter("quadrature_tolerance", "float", 1e-8),
    ), _run_overlap),
    ScenarioKind("individuality", "state-independent part of the overlap", "abs_I", (
        Parameter("block_energies", "spectra"),
        Parameter("offsets", "floats"),
    ), _run_individuality),
    ScenarioKind("bounds", "orthogonalization bounds", "orthogonalization_time", (
        Parameter("hamiltonian", "matrix"),
        Parameter("state", "vector"),
        Parameter("t_max", "float?", None, "search horizon, four times tau_min by default"),
        Parameter("grid", "int", 2000),
        Parameter("block_excess", "floats", None, "excess energies of independent blocks for the joint bound"),
    ), _run_bounds),
    ScenarioKind("moments", "typicality of random state amplitudes", "mean_c2", (
        Parameter("N", "int"),
        Parameter("samples", "int", 100000),
        Parameter("standard_errors", "float", 4.0),
    ), _run_moments),
    ScenarioKind("golden-overlap", "two-block overlap with uniform populations", "abs_S2", (
        Parameter("omega_1", "float", 1.0),
        Parameter("omega_2", "float", 1.0),
    ), _run_golden_overlap),
    ScenarioKind("trajectory", "restructuring of a composite system", "blocks", _SYSTEM + (
        Parameter("epsilon", "float", composite.DEFAULT_EPSILON),
        Parameter("t0", "float", 1.0),
        Parameter("half_width", "float", 0.1),
        Parameter("steps", "int", 1),
        Parameter("horizon", "float?", None, "comparison horizon of the detected against the trivial factorization"),
    ), _run_trajectory),
    ScenarioKind("reversibility", "irreversibility of restructuring", "relative_entropy", (
        Parameter("mode", "choice:table|redistribution|demo", "table"),
        Parameter("labels", "labels", None, "table mode: whitespace separated labels"),
        Parameter("table", "matrix", None, "table mode: joint transition probabilities"),
        Parameter("t0", "float", 1.0),
        Parameter("half_width", "float", 0.1),
        Parameter("t0_after", "float?", None),
        Parameter("half_width_after", "float?", None),
        Parameter("blocks_before", "int", 1),
        Parameter("blocks_after", "int", 1),
        Parameter("bins", "int", reversibility.DEFAULT_BINS),
        Parameter("dims", "ints", None, "demo mode"),
        Parameter("self_terms", "self-terms", None, "demo mode"),
        Parameter("pair_terms", "pair-terms", None, "demo mode"),
        Parameter("state", "vector", "random", "demo mode"),
        Parameter("partitions", "partitions", None, "demo mode: structures run forward, then undone in reverse"),
        Parameter("trials", "int", 100),
    ), _run_reversibility),
    ScenarioKind("decay", "nonexponential decay and decay chains", "short_time_exponent", (
        Parameter("clock", "choice:canonical|unit", "canonical"),
        Parameter("a", "float", 2.0),
        Parameter("b", "float", 1.0),
        Parameter("p", "float", 1.0),
        Parameter("rate", "float", 1.0),
        Parameter("initial", "float", 1.0),
        Parameter("daughter_rate", "float", 0.5),
        Parameter("daughter_a", "float?", None),
        Parameter("daughter_b", "float?", None),
        Parameter("daughter_p", "float?", None),
        Parameter("t_max", "float", 10.0),
        Parameter("points", "int", 11),
        Parameter("t_low", "float", 1e-4),
        Parameter("t_high", "float", 1e-2),
    ), _run_decay),
    ScenarioKind("reduced-dynamics", "reduced states through two restructurings", "worst_oracle", (
        Parameter("dims", "ints", (2, 2, 2, 2)),
        Parameter("t12", "float", 0.7),
        Parameter("t34", "float", 1.3),
        Parameter("t23", "float", 0.4),
        Parameter("t1", "float", 0.9),
        Parameter("t4", "float", 1.1),
        Parameter("t34_alternative", "float?", None),
        Parameter("instances", "int", 50),
        Parameter("oracle_tolerance", "float", 1e-10),
    ), _run_reduced_dynamics),
)}

def _validate(name:str, section:Any, base:Path) -> Scenario:
    if not isinstance(section, dict):
        raise ScenarioValidationError(f"{name}: a scenario section must be a mapping, got {type(section).__name__}.")
    kind_name = section.get("kind")
    if kind_name not in CATALOG:
        raise ScenarioValidationError(f"{name}: unknown kind {kind_name!r}; see `localtimes list`.")
    kind = CATALOG[kind_name]
    known = {p.name for p in kind.parameters}
    unknown = sorted(set(section) - known - set(RESERVED_KEYS))
    if unknown:
        raise ScenarioValidationError(f"{name}: {kind_name} does not take parameter {unknown[0]!r}.")

    parameters = {}
    for p in kind.parameters:
        if p.name not in section or section[p.name] is None:
            if p.required:
                raise ScenarioValidationError(f"{name}: parameter {p.name!r} is required by {kind_name}.")
            parameters[p.name] = p.default
            continue
        convert = _converter(p.type)
        try:
            parameters[p.name] = convert(section[p.name], base)
        except (TypeError, ValueError, OSError) as e:
            raise ScenarioValidationError(f"{name}: parameter {p.name!r}: {e}") from e

    def reserved(key:str, convert):
        if section.get(key) is None:
            return None
        try:
            return convert(section[key], base)
        except (TypeError, ValueError) as e:
            raise ScenarioValidationError(f"{name}: parameter {key!r}: {e}") from e

    expected = reserved("expected", _float)
    tolerance = reserved("tolerance", _float)
    if (expected is None) != (tolerance is None):
        raise ScenarioValidationError(f"{name}: 'expected' and 'tolerance' go together.")
    if tolerance is not None and not tolerance >= 0:
        raise ScenarioValidationError(f"{name}: parameter 'tolerance' must be nonnegative, got {tolerance}.")
    seed = reserved("seed", _int)
    if seed is not None and seed < 0:
        raise ScenarioValidationError(f"{name}: parameter 'seed' must be nonnegative, got {seed}.")
    golden = bool(section.get("golden", False))
    if golden and expected is None:
        raise ScenarioValidationError(f"{name}: a golden scenario declares 'expected' and 'tolerance'.")
    raw = {k: v for k, v in section.items() if k not in RESERVED_KEYS}
    return Scenario(name, kind_name, parameters, raw, seed, reserved("output", _str), expected, tolerance, golden)

def load_config(path:Path) -> List[Scenario]:
    """ Reads and validates every section of a scenario file. """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            document = yaml.safe_load(f)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark is not None else str(path)
        problem = getattr(e, "problem", None) or str(e)
        raise ScenarioParseError(f"{where}: {problem}") from e
    except OSError as e:
        raise ScenarioParseError(f"{path}: {e.strerror or e}") from e
    if not isinstance(document, dict) or not document:
        raise ScenarioParseError(f"{path}:1:1: expected a mapping of scenario sections")
    scenarios = [_validate(str(name), section, path.parent) for name, section in document.items()]
    trace(DEBUG, "load_config", f"{path}: {[s.name for s in scenarios]}")
    return scenarios

def _apply_expectation(s:Scenario, rows:List[Row]) -> List[Row]:
    if s.expected is None:
        return rows
    primary = CATALOG[s.kind].primary
    if not any(r.quantity == primary for r in rows):
        raise ScenarioValidationError(f"{s.name}: no {primary!r} row to check 'expected' against.")
    return [Row.check(r.quantity, r.value, s.expected, s.tolerance, r.parameter) if r.quantity == primary else r for r in rows] # type: ignore

def _plain(value:Any) -> Any:
    """ YAML-safe copy of a configured value. """
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, complex):
        return str(value)
    return value

def metadata(s:Scenario, seed:int) -> dict:
    return {
        "scenario": s.name,
        "kind": s.kind,
        "parameters": _plain(dict(s.raw)),
        "seed": seed,
        "generator": "PCG64",
        "stream_entropy": list(stream_entropy(seed, s.name)),
        "expected": s.expected,
        "tolerance": s.tolerance,
        "golden": s.golden,
        "version": __version__,
    }

def resolve_seed(s:Scenario, seed:int=0) -> int:
    """ The scenario's own seed, else the run-wide one. """
    return s.seed if s.seed is not None else seed

def run_scenario(s:Scenario, out_dir:Path, seed:int=0) -> ScenarioResult:
    """ Runs one scenario on its own stream and writes its table and metadata. """
    seed = resolve_seed(s, seed)
    rng = stream_for(seed, s.name)
    try:
        rows = _apply_expectation(s, CATALOG[s.kind].runner(s, rng))
    except (ScenarioError, ConvergenceError):
        raise
    except LocalTimesError as e:
        raise ScenarioValidationError(f"{s.name}: {e}") from e
    paths = export(Path(out_dir) / (s.output or s.name), s.name, rows, metadata(s, seed))
    trace(DEBUG, "run_scenario", f"{s.name}: {len(rows)} rows")
    return ScenarioResult(s, tuple(rows), tuple(paths))

def run_all(scenarios:Sequence[Scenario], out_dir:Path, seed:int=0, threads:int=1) -> List[ScenarioResult]:
    """ Runs the scenarios on a thread pool; results come back in the order of `scenarios`. """
    if threads < 1:
        raise ScenarioValidationError(f"Thread count must be positive, got {threads}.")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(run_scenario, s, out_dir, seed) for s in scenarios]
        return [f.result() for f in futures]

def catalog_data() -> dict:
    out = {}
    for kind in CATALOG.values():
        out[kind.name] = {
            "anchor": kind.anchor,
            "primary": kind.primary,
            "parameters": {
                p.name: {"type": p.type, "required": p.required, **({} if p.required else {"default": _plain(p.default)}), **({"help": p.help} if p.help else {})}
                for p in kind.parameters
            },
        }
    return out

def list_scenarios(as_yaml:bool=False) -> str:
    """ The catalog of scenario kinds with their parameters and defaults. """
    if as_yaml:
        return yaml.safe_dump(catalog_data(), sort_keys=False)
    lines = []
    for kind in CATALOG.values():
        lines.append(f"{kind.name}: {kind.anchor} (checks {kind.primary})")
        for p in kind.parameters:
            default = "required" if p.required else f"default {_plain(p.default)!r}"
            lines.append(f"    {p.name} [{p.type}] {default}" + (f": {p.help}" if p.help else ""))
    return "\n".join(lines) + "\n"
