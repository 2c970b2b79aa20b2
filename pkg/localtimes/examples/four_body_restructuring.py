"""
Four qubits are merged pairwise, then the middle pair is merged across, and the reduced states are followed through both restructurings.
"""

from pathlib import Path

import numpy as np

from localtimes import SIGMA_X, SIGMA_Z, basis_state, random_state
from localtimes.composite import CompositeHamiltonian, Partition, Trajectory, apply_transition, detect_partition
from localtimes.misc import stream_for
from localtimes.reduced import FourBodySystem, initial_reduced

def chain_hamiltonian(coupling:float=0.3, fields=(0.5, 0.6, 0.7, 0.4)) -> CompositeHamiltonian:
    """ Four qubits in a row; only the outer pairs talk to each other. """
    exchange = coupling * (np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Z, SIGMA_Z)) / 2
    return CompositeHamiltonian(
        tuple((k, 2) for k in range(4)),
        {k: h * SIGMA_Z / 2 for k, h in enumerate(fields)},
        {(0, 1): exchange, (2, 3): exchange},
    )

def run(seed:int=0, t12:float=0.7, t34:float=1.3, t23:float=0.4, t1:float=0.9, t4:float=1.1) -> None:
    rng = stream_for(seed, "four_body_restructuring")

    H = chain_hamiltonian()
    psi = random_state(rng, H.dims)
    partition = detect_partition(psi, H)
    print(f"Detected blocks {partition}")
    traj = apply_transition(Trajectory.start(H, psi), partition, rng)
    traj = apply_transition(traj, Partition.of(H, [[0], [1, 2], [3]]), rng)
    print(f"Two structures, replay deviation {traj.replay():.3g}")

    system = FourBodySystem.random(rng)
    for k in (1, 2, 3, 4):
        print(f"Subsystem {k}: initial populations {np.round(initial_reduced(system.amplitudes, k).weights, 4)}")
    report = system.report(t12, t34, t23, t1, t4)
    for name, value in vars(report).items():
        print(f"{name:>24} {value:.3g}")

    ground = basis_state(H.dims, 0)
    print(f"Blocks of |0000>: {detect_partition(ground, H)}")

if __name__ == "__main__":
    import argparse

    argp = argparse.ArgumentParser(description="Follow reduced states of four qubits through two restructurings.")
    argp.add_argument("--seed", default=0, type=int, help="Seed of the random instance.")
    argp.add_argument("--dot", default=None, type=Path, help="Also write the coupling graph of the initial state to this directory.")
    args = argp.parse_args()
    run(args.seed)
    if args.dot is not None:
        from localtimes.export.coupling_graph import export
        H = chain_hamiltonian()
        export(random_state(stream_for(args.seed, "four_body_restructuring"), H.dims), H, name="four_body").save(directory=args.dot)
