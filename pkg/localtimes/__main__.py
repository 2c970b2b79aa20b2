"""
Command line front end: `python -m localtimes run <config>`, `--all-golden` and `list`.
"""

from datetime import datetime
from pathlib import Path
from typing import List, Sequence
import argparse
import os
import sys

from colored import Fore, Style

from . import ConvergenceError
from .scenarios import (EXIT_CONVERGENCE, EXIT_GOLDEN_MISS, EXIT_OK, GOLDEN_CONFIG, ScenarioError, ScenarioResult,
        list_scenarios, load_config, run_all)

OUT_DIR_ENVIRONMENT_VARIABLE:str = "LOCALTIMES_OUT_DIR"

def default_out_dir() -> Path:
    env = os.environ.get(OUT_DIR_ENVIRONMENT_VARIABLE)
    if env:
        return Path(env)
    return Path.cwd() / "build" / datetime.now().isoformat()[:19].replace(":","-")

def summary_line(result:ScenarioResult) -> str:
    failed = result.failed
    checked = sum(1 for r in result.rows if r.status != "info")
    if failed:
        head = f"{Fore.red}{Style.bold}FAIL{Style.reset}"
        detail = ", ".join(f"{r.quantity}={r.value:.6g}" for r in failed)
    else:
        head = f"{Fore.green}{Style.bold}ok{Style.reset}"
        detail = f"{checked} checked, {len(result.rows)} rows"
    return f"{head} {result.scenario.name} [{result.scenario.kind}] {detail} {Fore.rgb(100,100,100)}-> {result.paths[0]}{Style.reset}"

def parser() -> argparse.ArgumentParser:
    argp = argparse.ArgumentParser(prog="localtimes", description="Run local time scheme scenarios and export their results.")
    sub = argp.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run every scenario of a configuration file.")
    run.add_argument("config", type=Path, nargs="?", default=None, help="Scenario configuration file.")
    run.add_argument("--all-golden", action="store_true", help="Run the bundled golden scenarios instead of a configuration file.")
    run.add_argument("--out-dir", "-d", type=Path, default=None, help=f"Target directory; ${OUT_DIR_ENVIRONMENT_VARIABLE} or build/<timestamp> by default.")
    run.add_argument("--seed", type=int, default=0, help="Seed of scenarios which do not set their own.")
    run.add_argument("--threads", "-j", type=int, default=1, help="Scenarios run concurrently on this many threads.")

    listing = sub.add_parser("list", help="Print the scenario kinds with their parameters.")
    listing.add_argument("--yaml", action="store_true", help="Print the catalog as YAML.")
    return argp

def main(argv:Sequence[str]|None=None) -> int:
    args = parser().parse_args(argv)

    if args.command == "list":
        sys.stdout.write(list_scenarios(as_yaml=args.yaml))
        return EXIT_OK

    if args.all_golden == (args.config is not None):
        print("Give either a configuration file or --all-golden.", file=sys.stderr)
        return 2
    if args.seed < 0:
        print(f"Seed must be nonnegative, got {args.seed}.", file=sys.stderr)
        return 2

    config = GOLDEN_CONFIG if args.all_golden else args.config
    out_dir = args.out_dir if args.out_dir is not None else default_out_dir()
    try:
        scenarios = load_config(config)
        results:List[ScenarioResult] = run_all(scenarios, out_dir, seed=args.seed, threads=args.threads)
    except ScenarioError as e:
        print(f"{Fore.red}{type(e).__name__}{Style.reset}: {e}", file=sys.stderr)
        return e.exit_code
    except ConvergenceError as e:
        print(f"{Fore.red}ConvergenceError{Style.reset}: {e}", file=sys.stderr)
        return EXIT_CONVERGENCE

    for result in results:
        print(summary_line(result))
    if args.all_golden:
        missed = [r for r in results if r.scenario.golden and r.failed]
    else:
        missed = [r for r in results if r.failed]
    return EXIT_GOLDEN_MISS if missed else EXIT_OK

if __name__ == "__main__":
    raise SystemExit(main())
