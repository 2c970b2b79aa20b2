#!/usr/bin/env python3

"""
Odds and ends shared by the modules: debug channels, seeded streams, quadrature nodes and safe file output.
"""

import hashlib
import inspect
import os
import sys
import tempfile
from pathlib import Path
from typing import Set, Tuple

import numpy as np
from colored import Fore, Style

DEBUG_ENVIRONMENT_VARIABLE:str = "LOCALTIMES_DEBUG"

def debug_channels(env:str=DEBUG_ENVIRONMENT_VARIABLE) -> Set[str]:
    """ Reads the comma separated list of debugging channels from the environment.
    Each module keeps its own set; a channel is enabled for a module if the module's set contains it. """
    raw = os.environ.get(env, "")
    return {ch.strip() for ch in raw.split(",") if ch.strip()}

DEBUG:Set[str] = debug_channels()
#DEBUG.add("stream_for")
#DEBUG.add("atomic_write")

def trace(debug:Set[str], channel:str, message:str) -> None:
    """ Prints the message to stderr if `channel` is enabled in `debug`, together with the caller's location. """
    if channel not in debug:
        return
    try:
        caller = inspect.stack()[1]
        where = f"...{caller.filename[-20:]}:{caller.lineno}"
    except Exception:
        where = "<code context not available>"
    print(f"{Fore.cyan}{Style.bold}{channel}{Style.reset} {message} {Fore.rgb(100,100,100)}\\_> {where}{Style.reset}", file=sys.stderr)

def stream_entropy(seed:int, name:str) -> Tuple[int, int]:
    """ The entropy pair a scenario stream is seeded from: the global seed and a digest of the scenario name. """
    digest = int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")
    return int(seed), digest

def stream_for(seed:int, name:str) -> np.random.Generator:
    """ An independent, reproducible random stream for a named consumer. """
    entropy = stream_entropy(seed, name)
    trace(DEBUG, "stream_for", f"{name} <- {entropy}")
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))

def gauss_legendre(n:int, lower:float, upper:float) -> Tuple[np.ndarray, np.ndarray]:
    """ Gauss-Legendre nodes and weights mapped from [-1, 1] onto [lower, upper]. """
    assert n > 0, f"Quadrature needs at least one node, got {n}."
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (upper - lower)
    mid = 0.5 * (upper + lower)
    return mid + half * x, half * w

def atomic_write(path:Path, text:str) -> Path:
    """ Writes the whole text or nothing: a temporary file in the target directory is renamed over the destination. """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    trace(DEBUG, "atomic_write", str(path))
    return path

def format_float(x:float) -> str:
    """ Seventeen significant digits, enough to round-trip a double. """
    return f"{float(x):.17g}"
