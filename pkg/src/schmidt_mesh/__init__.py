"""Self-configuring interferometer meshes that learn the Schmidt decomposition of photon pairs."""
from .imperfections import EmptyMeasurementError, LossModel, ShotNoiseModel, apply_input_loss, apply_output_loss
from .linalg import SvdResult, haar_unitary, make_rng, svd_oracle
from .mesh import MeshNetwork, MziNode, SelfConfiguringLayer, Topology, mzi_unitary, network_unitary
from .protocols import (
    ScatteringScenario,
    distribute_entanglement,
    generate_separable,
    generate_supermode_bell,
    read_schmidt_mode,
)
from .sources import SpdcParams, degenerate_state, random_state, schmidt_state, spdc_jsa
from .states import EnsembleState, SchmidtReport, StateMatrix, von_neumann_entropy
from .trainer import (
    GradientMethod,
    Measurement,
    TrainingSchedule,
    sequential_coincidence_training,
    sequential_power_training,
)

__all__ = [
    "EmptyMeasurementError", "EnsembleState", "GradientMethod", "LossModel", "Measurement", "MeshNetwork",
    "MziNode", "ScatteringScenario", "SchmidtReport", "SelfConfiguringLayer", "ShotNoiseModel", "SpdcParams",
    "StateMatrix", "SvdResult", "Topology", "TrainingSchedule", "apply_input_loss", "apply_output_loss",
    "degenerate_state", "distribute_entanglement", "generate_separable", "generate_supermode_bell",
    "haar_unitary", "make_rng", "mzi_unitary", "network_unitary", "random_state", "read_schmidt_mode",
    "schmidt_state", "sequential_coincidence_training", "sequential_power_training", "spdc_jsa",
    "svd_oracle", "von_neumann_entropy",
]
