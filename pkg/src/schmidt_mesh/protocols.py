"""Things to do with a trained mesh pair: read modes, carve out product states,
synthesize supermode Bell pairs and distribute entanglement through scattering channels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import haar_unitary, make_rng, svd_oracle
from .mesh import MeshNetwork, Topology, network_unitary
from .states import (
    SCHMIDT_THRESHOLD,
    StateMatrix,
    crosstalk_from_coincidences,
    transformed_amplitudes,
)
from .trainer import Measurement, TrainingResult, TrainingSchedule, sequential_coincidence_training

UNITARY_TOL = 1e-12


class ModeAbsentError(ValueError):
    pass


class NotDegenerateError(ValueError):
    pass


def read_schmidt_mode(mesh: MeshNetwork, k: int) -> np.ndarray:
    """Mode k in the input basis: column k of U^dagger, i.e. the conjugated k-th row of U.

    For the B network this is V*_{:,k}, matching <y_k|_B = sum_j V*_jk <x_j|.
    """
    if not 0 <= k < mesh.readable_modes:
        raise ValueError(f"mode {k} is not fixed yet: mesh trained through {mesh.trained_depth} layers")
    return network_unitary(mesh)[k].conj()


def generate_separable(mesh_a: MeshNetwork, mesh_b: MeshNetwork, state: StateMatrix, k: int,
                       threshold: float = SCHMIDT_THRESHOLD) -> StateMatrix:
    """Block every output port except (k, k) and send the survivor back through the inverse networks."""
    u_a, u_b = network_unitary(mesh_a), network_unitary(mesh_b)
    out = transformed_amplitudes(state, u_a, u_b)
    if not (0 <= k < min(out.shape)):
        raise ValueError(f"mode index {k} out of range for a {out.shape} state")
    if abs(out[k, k]) ** 2 < threshold:
        raise ModeAbsentError(f"mode absent: port pair ({k}, {k}) carries power {abs(out[k, k]) ** 2:.3g}")
    blocked = np.zeros_like(out)
    blocked[k, k] = out[k, k]
    return StateMatrix.normalized(u_a.conj().T @ blocked @ u_b.conj())


def generate_supermode_bell(mesh_a: MeshNetwork, mesh_b: MeshNetwork, state: StateMatrix, phi: float,
                            tol_deg: float = 0.01) -> StateMatrix:
    """Two-port output (|x1 x1> + e^{i phi} |x2 x2>)/sqrt2 from a source with lambda_1 = lambda_2.

    A phase shifter on A-port 1 sets the relative phase and an attenuator on the
    stronger of ports 0 and 1 trims the residual imbalance left by training; ports >= 2
    are blocked.
    """
    out = transformed_amplitudes(state, network_unitary(mesh_a), network_unitary(mesh_b))
    if min(out.shape) < 2:
        raise ValueError("supermode synthesis needs at least two ports per side")
    block = out[:2, :2].copy()
    c0, c1 = abs(block[0, 0]) ** 2, abs(block[1, 1]) ** 2
    if c1 == 0 or c0 == 0:
        raise NotDegenerateError("input is not degenerate: one of the two leading modes is empty")
    ratio = float(np.sqrt(c0 / c1))
    if abs(ratio - 1.0) > tol_deg:
        raise NotDegenerateError(f"input is not degenerate: lambda_1/lambda_2 = {ratio:.6f} "
                                 f"outside 1 +/- {tol_deg}")
    shift = phi - (np.angle(block[1, 1]) - np.angle(block[0, 0]))
    block[1, :] *= np.exp(1j * shift)
    if c1 > c0:
        block[1, :] *= np.sqrt(c0 / c1)
    else:
        block[0, :] *= np.sqrt(c1 / c0)
    return StateMatrix.normalized(block)


@dataclass
class ScatteringScenario:
    """A source whose photons reach Alice and Bob through unknown mode-mixing channels."""

    source: StateMatrix
    channel_a: np.ndarray
    channel_b: np.ndarray
    channel_seeds: tuple[int | None, int | None] = (None, None)

    def __post_init__(self):
        n_a, n_b = self.source.shape
        for name, s, n in (("channel_a", self.channel_a, n_a), ("channel_b", self.channel_b, n_b)):
            s = np.asarray(s, dtype=complex)
            if s.shape != (n, n):
                raise ValueError(f"{name} has shape {s.shape}, expected {(n, n)}")
            if np.max(np.abs(s.conj().T @ s - np.eye(n))) > UNITARY_TOL:
                raise ValueError(f"{name} is not unitary within {UNITARY_TOL}")
        self.channel_a = np.asarray(self.channel_a, dtype=complex)
        self.channel_b = np.asarray(self.channel_b, dtype=complex)

    @classmethod
    def haar(cls, source: StateMatrix, seed_a: int, seed_b: int) -> ScatteringScenario:
        n_a, n_b = source.shape
        return cls(source, haar_unitary(n_a, make_rng(seed_a)), haar_unitary(n_b, make_rng(seed_b)),
                   (seed_a, seed_b))

    @property
    def received(self) -> StateMatrix:
        # renormalize to absorb rounding from the channel products
        return StateMatrix.normalized(self.channel_a @ self.source.g @ self.channel_b.T)


@dataclass
class DistributionReport:
    source: str
    channel_seeds: tuple[int | None, int | None]
    values_learned: np.ndarray
    values_oracle: np.ndarray
    crosstalk: float
    diagonal_sum: float
    measurements_used: int
    training: TrainingResult | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "channel_seeds": list(self.channel_seeds),
            "values_learned": [float(v) for v in self.values_learned],
            "values_oracle": [float(v) for v in self.values_oracle],
            "crosstalk": float(self.crosstalk),
            "diagonal_sum": float(self.diagonal_sum),
            "measurements_used": int(self.measurements_used),
        }


def distribute_entanglement(scenario: ScatteringScenario, schedule: TrainingSchedule | None = None,
                            measurement: Measurement | None = None, source_name: str = "source",
                            topology: Topology | str = Topology.DIAGONAL) -> DistributionReport:
    """Alice and Bob train on coincidences of the received pairs; the channels stay unknown to them."""
    received = scenario.received
    n_a, n_b = received.shape
    result = sequential_coincidence_training(MeshNetwork.build(n_a, topology), MeshNetwork.build(n_b, topology),
                                             received, schedule, measurement)
    coinc = result.coincidences  # measured, so it carries the same noise as training
    oracle = svd_oracle(scenario.source.g)
    return DistributionReport(
        source=source_name,
        channel_seeds=scenario.channel_seeds,
        values_learned=result.report.values,
        values_oracle=oracle.values,
        crosstalk=crosstalk_from_coincidences(coinc),
        diagonal_sum=float(np.trace(coinc[: min(n_a, n_b), : min(n_a, n_b)])),
        measurements_used=result.report.measurements,
        training=result,
    )
