"""Walk through the trained-mesh protocols on small states and print what comes out."""
import numpy as np

from schmidt_mesh import MeshNetwork, make_rng, sequential_coincidence_training, svd_oracle
from schmidt_mesh.protocols import (
    ScatteringScenario,
    distribute_entanglement,
    generate_separable,
    generate_supermode_bell,
    read_schmidt_mode,
)
from schmidt_mesh.sources import degenerate_state, embedded_bell_state, random_state
from schmidt_mesh.states import entropy_of_measured, mode_fidelity


def entropy(state) -> float:
    return entropy_of_measured(svd_oracle(state.g).values)


def main() -> None:
    rng = make_rng(0)
    state = random_state(6, 6, rng)
    oracle = svd_oracle(state.g)
    trained = sequential_coincidence_training(MeshNetwork.build(6), MeshNetwork.build(6), state)
    print("mode readout fidelities:",
          [round(mode_fidelity(read_schmidt_mode(trained.mesh_a, k), oracle.left[:, k]), 6) for k in range(6)])
    for k in range(3):
        out = generate_separable(trained.mesh_a, trained.mesh_b, state, k)
        print(f"separable state from mode {k}: entropy {entropy(out):.2e} bits")

    deg = degenerate_state(4, rng)
    pair = sequential_coincidence_training(MeshNetwork.build(4), MeshNetwork.build(4), deg)
    outs = {phi: generate_supermode_bell(pair.mesh_a, pair.mesh_b, deg, phi) for phi in (0.0, np.pi / 2, np.pi)}
    for phi, out in outs.items():
        print(f"supermode Bell phi={phi:.3f}: entropy {entropy(out):.6f} bits")
    print(f"overlap phi=0 vs phi=pi: {abs(np.vdot(outs[0.0].g, outs[np.pi].g)):.2e}")

    scenario = ScatteringScenario.haar(embedded_bell_state(8), 1, 2)
    report = distribute_entanglement(scenario, source_name="bell")
    print(f"distribution through Haar channels: sum C_kk {report.diagonal_sum:.6f}, "
          f"crosstalk {report.crosstalk:.2e}, values {np.round(report.values_learned[:3], 5).tolist()}")


if __name__ == "__main__":
    main()
