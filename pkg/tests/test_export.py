import numpy as np
import yaml

from localtimes import SIGMA_Z, basis_state
from localtimes.composite import CompositeHamiltonian
from localtimes.export import coupling_graph, table

def test_csv_rows(tmp_path):
    rows = [table.Row("abs_S2", 0.1), table.Row.check("tau", 3.0, 3.0, 1e-6, parameter=2), table.Row.bound("drift", 1.0, 1e-10)]
    paths = table.export(tmp_path / "run", "demo", rows, {"kind": "overlap"})
    lines = paths[0].read_text().splitlines()
    assert lines[0] == "scenario,quantity,parameter,value,tolerance,status"
    assert lines[1] == "demo,abs_S2,,0.10000000000000001,,info"
    assert lines[2].endswith(",pass") and lines[3].endswith(",fail")
    assert yaml.safe_load(paths[1].read_text()) == {"kind": "overlap"}
    assert sorted(p.name for p in tmp_path.iterdir()) == ["run.csv", "run.meta.yaml"]

def test_failed_nan_row():
    assert table.Row.check("t", float("nan"), 1.0, 1.0).failed

def test_coupling_graph_dot():
    H = CompositeHamiltonian(((0, 2), (1, 2), (2, 2)), {k: SIGMA_Z / 2 for k in range(3)},
            {(0, 1): 0.3 * np.kron(SIGMA_Z, SIGMA_Z), (1, 2): 1e-9 * np.kron(SIGMA_Z, SIGMA_Z)})
    source = coupling_graph.export(basis_state(H.dims, 0), H).source
    assert "cluster_0" in source and "cluster_1" in source
    assert "0 -- 1" in source and "style=solid" in source
    assert "1 -- 2" in source and "style=dotted" in source
