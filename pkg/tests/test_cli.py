from dataclasses import replace
from pathlib import Path
import os
import subprocess
import sys

import numpy as np
import yaml

from localtimes import __version__, random_state
from localtimes.__main__ import OUT_DIR_ENVIRONMENT_VARIABLE, main
from localtimes.misc import stream_for
from localtimes.scenarios import CATALOG, load_config, trajectory_system

REPO = Path(__file__).resolve().parents[1]

SMALL = """
qubit_bounds:
  kind: bounds
  hamiltonian: [[0.5, 0], [0, -0.5]]
  state: [1, 1]
  expected: 3.141592653589793
  tolerance: 1.0e-6
few_moments:
  kind: moments
  N: 4
  samples: 10000
mixed_trio:
  kind: trajectory
  dims: [2, 2, 2]
  self_terms: [[[0.5, 0], [0, -0.5]], null, [[0.5, 0], [0, -0.5]]]
  pair_terms:
    - between: [0, 1]
      matrix: [[0.3, 0, 0, 0], [0, -0.3, 0, 0], [0, 0, -0.3, 0], [0, 0, 0, 0.3]]
"""

def write(tmp_path:Path, text:str, name:str="scenarios.yaml") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path

def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for kind in CATALOG:
        assert kind in out
    assert main(["list", "--yaml"]) == 0
    catalog = yaml.safe_load(capsys.readouterr().out)
    assert set(catalog) == set(CATALOG)
    assert catalog["decay"]["parameters"]["a"] == {"type": "float", "required": False, "default": 2.0}

def test_run_writes_tables(tmp_path, capsys):
    config = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["run", str(config), "--out-dir", str(out)]) == 0
    assert "qubit_bounds" in capsys.readouterr().out
    for name in ("qubit_bounds", "few_moments", "mixed_trio"):
        lines = (out / f"{name}.csv").read_text().splitlines()
        assert lines[0] == "scenario,quantity,parameter,value,tolerance,status"
        assert all(line.startswith(name + ",") for line in lines[1:])
    checked = [line for line in (out / "qubit_bounds.csv").read_text().splitlines() if ",orthogonalization_time," in line]
    assert checked and checked[0].endswith(",pass")
    meta = yaml.safe_load((out / "few_moments.meta.yaml").read_text())
    assert meta["kind"] == "moments" and meta["seed"] == 0 and meta["generator"] == "PCG64"
    assert meta["version"] == __version__
    assert meta["parameters"] == {"N": 4, "samples": 10000}

def test_same_seed_same_bytes(tmp_path):
    config = write(tmp_path, SMALL)
    runs = [tmp_path / "a", tmp_path / "b", tmp_path / "c"]
    assert main(["run", str(config), "-d", str(runs[0]), "--seed", "5"]) == 0
    assert main(["run", str(config), "-d", str(runs[1]), "--seed", "5"]) == 0
    assert main(["run", str(config), "-d", str(runs[2]), "--seed", "5", "--threads", "3"]) == 0
    for name in ("few_moments.csv", "mixed_trio.csv"):
        texts = {(d / name).read_bytes() for d in runs}
        assert len(texts) == 1

def test_other_seed_other_samples(tmp_path):
    config = write(tmp_path, SMALL)
    assert main(["run", str(config), "-d", str(tmp_path / "a"), "--seed", "1"]) == 0
    assert main(["run", str(config), "-d", str(tmp_path / "b"), "--seed", "2"]) == 0
    assert (tmp_path / "a" / "few_moments.csv").read_bytes() != (tmp_path / "b" / "few_moments.csv").read_bytes()

def test_parse_error(tmp_path, capsys):
    config = write(tmp_path, "broken:\n  kind: [moments\n")
    assert main(["run", str(config), "-d", str(tmp_path / "out")]) == 2
    assert f"{config}:" in capsys.readouterr().err
    assert main(["run", str(write(tmp_path, "- 1\n- 2\n", "list.yaml")), "-d", str(tmp_path / "out")]) == 2

def test_usage_errors(tmp_path):
    config = write(tmp_path, SMALL)
    assert main(["run", "-d", str(tmp_path)]) == 2
    assert main(["run", str(config), "--all-golden", "-d", str(tmp_path)]) == 2
    assert main(["run", str(config), "--seed", "-1", "-d", str(tmp_path)]) == 2

def test_validation_errors(tmp_path, capsys):
    cases = {
        "unknown.yaml": "x:\n  kind: teleport\n",
        "missing.yaml": "x:\n  kind: bounds\n  state: [1, 0]\n",
        "extra.yaml": "x:\n  kind: moments\n  N: 4\n  colour: red\n",
        "lonely.yaml": "x:\n  kind: golden-overlap\n  expected: 0.03\n",
        "seed.yaml": "x:\n  kind: moments\n  N: 4\n  seed: -3\n",
        "golden.yaml": "x:\n  kind: moments\n  N: 4\n  golden: true\n",
        "csv.yaml": "x:\n  kind: bounds\n  hamiltonian: absent.csv\n  state: [1, 0]\n",
    }
    for name, text in cases.items():
        assert main(["run", str(write(tmp_path, text, name)), "-d", str(tmp_path / "out")]) == 3, name
    assert "teleport" in capsys.readouterr().err

def test_runtime_domain_error_is_validation(tmp_path):
    config = write(tmp_path, "x:\n  kind: bounds\n  hamiltonian: [[1, 1], [0, 1]]\n  state: [1, 0]\n")
    assert main(["run", str(config), "-d", str(tmp_path / "out")]) == 3
    few = write(tmp_path, "x:\n  kind: moments\n  N: 4\n  samples: 100\n", "few.yaml")
    assert main(["run", str(few), "-d", str(tmp_path / "out")]) == 3

def test_expected_miss(tmp_path, capsys):
    config = write(tmp_path, "wrong:\n  kind: golden-overlap\n  expected: 0.5\n  tolerance: 1.0e-3\n")
    assert main(["run", str(config), "-d", str(tmp_path / "out")]) == 1
    assert "FAIL" in capsys.readouterr().out
    assert (tmp_path / "out" / "wrong.csv").read_text().splitlines()[1].endswith(",fail")

def test_quadrature_not_converging(tmp_path):
    config = write(tmp_path, """
stiff:
  kind: sigma-map
  hamiltonian: [[0, 0], [0, 50]]
  state: [1, 1]
  t0: 2.0
  half_width: 1.0
  sigma: 1.0
  nodes: 2
""")
    assert main(["run", str(config), "-d", str(tmp_path / "out")]) == 4

def test_matrix_from_csv(tmp_path):
    (tmp_path / "qubit.csv").write_text("0.5,0\n0,-0.5\n")
    config = write(tmp_path, """
from_file:
  kind: bounds
  hamiltonian: qubit.csv
  state: [1, 1]
  expected: 3.141592653589793
  tolerance: 1.0e-6
  output: renamed
""")
    assert main(["run", str(config), "-d", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "renamed.csv").exists()

def test_out_dir_from_environment(tmp_path, monkeypatch):
    target = tmp_path / "env"
    monkeypatch.setenv(OUT_DIR_ENVIRONMENT_VARIABLE, str(target))
    config = write(tmp_path, "overlap:\n  kind: golden-overlap\n")
    assert main(["run", str(config)]) == 0
    assert (target / "overlap.csv").exists()
    assert (target / "overlap.meta.yaml").exists()

def test_all_golden(tmp_path):
    assert main(["run", "--all-golden", "-d", str(tmp_path)]) == 0
    assert (tmp_path / "golden_overlap.csv").exists()

def test_module_entry_point(tmp_path):
    config = write(tmp_path, "overlap:\n  kind: golden-overlap\n  expected: 0.0292\n  tolerance: 5.0e-4\n")
    env = dict(os.environ, PYTHONPATH=str(REPO))
    done = subprocess.run([sys.executable, "-m", "localtimes", "run", str(config), "--out-dir", str(tmp_path / "out")],
            cwd=REPO, env=env, capture_output=True, text=True, timeout=600)
    assert done.returncode == 0, done.stderr
    assert (tmp_path / "out" / "overlap.csv").exists()

def test_trajectory_system_uses_the_run_seed(tmp_path):
    trio = {s.name: s for s in load_config(write(tmp_path, SMALL))}["mixed_trio"]
    assert trio.seed is None
    psi = trajectory_system(trio, 7)[1]
    assert np.array_equal(psi.amplitudes, random_state(stream_for(7, "mixed_trio"), (2, 2, 2)).amplitudes)
    assert not np.array_equal(psi.amplitudes, trajectory_system(trio)[1].amplitudes)
    pinned = replace(trio, seed=0)
    own = trajectory_system(pinned, 7)[1]
    assert np.array_equal(own.amplitudes, random_state(stream_for(0, "mixed_trio"), (2, 2, 2)).amplitudes)
