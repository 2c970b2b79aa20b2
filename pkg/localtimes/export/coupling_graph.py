"""
Exports the coupling graph of a composite state into a DOT file for further visualization.
Nodes are subsystems, edges are pair terms labelled by their mean; edges above the isolation threshold are solid,
the rest dotted, and the detected blocks are drawn as clusters.
"""

from datetime import datetime
from pathlib import Path

import graphviz

from localtimes import StateVector
from localtimes.composite import DEFAULT_EPSILON, CompositeHamiltonian, coupling_graph, detect_partition
from localtimes.misc import format_float

def export(psi:StateVector, H:CompositeHamiltonian, epsilon:float=DEFAULT_EPSILON, name:str="coupling") -> graphviz.Graph:
    couplings = coupling_graph(psi, H, epsilon)
    graph:graphviz.Graph = graphviz.Graph(
        name=name,
        engine="dot",
        graph_attr={"rankdir":"LR", "label":f"threshold {format_float(couplings.threshold)}", "labelloc":"b"},
        node_attr={"shape":"circle", "fontsize":"14"},
        edge_attr={"fontsize":"10"},
    )

    partition = detect_partition(psi, H, epsilon)

    for k, block in enumerate(partition):
        with graph.subgraph(name=f"cluster_{k}") as sub:
            sub.attr(style="rounded,filled", fillcolor="grey95", label=f"block {k}")
            for sid in H.ordered(block):
                sub.node(str(sid), str(sid))

    for (a, b), mean in couplings.means.items():
        style = "solid" if (a, b) in couplings.edges else "dotted"
        graph.edge(str(a), str(b), f"{mean:.3g}", style=style)

    return graph

if __name__ == "__main__":
    import argparse

    from localtimes.scenarios import ScenarioError, load_config, trajectory_system

    argp = argparse.ArgumentParser(description="Export the coupling graph of a trajectory scenario's initial state to DOT.")
    argp.add_argument("config", type=Path, help="Scenario configuration file.")
    argp.add_argument("scenario", help="Name of a trajectory scenario in the file.")
    argp.add_argument("--target-dir", "-d", default=None, type=Path, help="Target directory.")
    argp.add_argument("--format", "-f", default=None, type=str, help="Render with graphviz into this format; only the DOT source is written otherwise.")
    argp.add_argument("--seed", default=0, type=int, help="Run seed, used when the scenario sets none.")
    args = argp.parse_args()

    try:
        scenarios = {s.name: s for s in load_config(args.config)}
        H, psi, epsilon = trajectory_system(scenarios[args.scenario], args.seed)
    except (ScenarioError, KeyError) as e:
        raise SystemExit(f"Cannot export {args.scenario}: {e}")

    graph = export(psi, H, epsilon, name=args.scenario)

    if args.target_dir is None:
        target_dir = Path.cwd() / "build" / (datetime.now().isoformat()[:19].replace(":","-") + "-" + args.scenario)
    else:
        target_dir = args.target_dir
    target_dir.mkdir(parents=True, exist_ok=True)

    if args.format is None:
        graph.save(directory=target_dir)
    else:
        graph.render(directory=target_dir, format=args.format)
