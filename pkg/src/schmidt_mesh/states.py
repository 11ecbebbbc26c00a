"""Bipartite states, the observables a mesh pair measures, and entanglement metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .linalg import as_matrix

NORM_TOL = 1e-12
SCHMIDT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class StateMatrix:
    """Amplitude matrix G of a pure state sum_jk G_jk |x_j>_A |x_k>_B."""

    g: np.ndarray

    def __post_init__(self):
        g = as_matrix(self.g, "state matrix")
        norm = np.linalg.norm(g)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state matrix must have unit Frobenius norm, got {norm:.15g}")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @classmethod
    def normalized(cls, g) -> StateMatrix:
        g = as_matrix(g, "state matrix")
        norm = np.linalg.norm(g)
        if norm == 0:
            raise ValueError("cannot normalize a zero state matrix")
        return cls(g / norm)

    @property
    def shape(self) -> tuple[int, int]:
        return self.g.shape


@dataclass(frozen=True)
class EnsembleState:
    """Statistical mixture of pure states, kept as an explicit ensemble."""

    components: tuple[tuple[float, StateMatrix], ...]

    def __post_init__(self):
        comps = tuple((float(p), s) for p, s in self.components)
        if not comps:
            raise ValueError("ensemble needs at least one component")
        if any(p <= 0 for p, _ in comps):
            raise ValueError("ensemble weights must be positive")
        total = sum(p for p, _ in comps)
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"ensemble weights must sum to 1, got {total!r}")
        shapes = {s.shape for _, s in comps}
        if len(shapes) != 1:
            raise ValueError(f"ensemble components have mismatched shapes {sorted(shapes)}")
        object.__setattr__(self, "components", comps)

    @property
    def shape(self) -> tuple[int, int]:
        return self.components[0][1].shape

    @property
    def is_pure(self) -> bool:
        return len(self.components) == 1


State = Union[StateMatrix, EnsembleState]


def components(state: State) -> list[tuple[float, np.ndarray]]:
    """(weight, amplitude matrix) pairs; a pure state is a one-element ensemble."""
    if isinstance(state, StateMatrix):
        return [(1.0, state.g)]
    return [(p, s.g) for p, s in state.components]


def _check_unitaries(shape, u_a, u_b) -> tuple[np.ndarray, np.ndarray]:
    u_a = as_matrix(u_a, "u_a")
    u_b = as_matrix(u_b, "u_b")
    n_a, n_b = shape
    if u_a.shape != (n_a, n_a) or u_b.shape != (n_b, n_b):
        raise ValueError(f"network sizes {u_a.shape}, {u_b.shape} do not match state {shape}")
    return u_a, u_b


def transformed_amplitudes(state: StateMatrix, u_a, u_b) -> np.ndarray:
    """Output amplitudes U_A G U_B^T; entry (j, k) is port pair (j, k)."""
    u_a, u_b = _check_unitaries(state.shape, u_a, u_b)
    return u_a @ state.g @ u_b.T


def coincidence_matrix(state: State, u_a, u_b) -> np.ndarray:
    u_a, u_b = _check_unitaries(state.shape, u_a, u_b)
    return sum(p * np.abs(u_a @ g @ u_b.T) ** 2 for p, g in components(state))


def output_power(state: State, u_a, u_b, side: str, port: int) -> float:
    c = coincidence_matrix(state, u_a, u_b)
    if side.upper() == "A":
        return float(c[port, :].sum())
    if side.upper() == "B":
        return float(c[:, port].sum())
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


def coincidence(state: State, u_a, u_b, j: int, k: int) -> float:
    return float(coincidence_matrix(state, u_a, u_b)[j, k])


def von_neumann_entropy(values: Sequence[float], base: float = 2) -> float:
    """-sum lambda^2 log(lambda^2), with 0 log 0 = 0."""
    v = np.asarray(values, dtype=float)
    if np.any(v < 0):
        raise ValueError("Schmidt values must be non-negative")
    if np.sum(v * v) > 1 + 1e-9:
        raise ValueError("Schmidt values exceed unit total weight")
    p = v[v > 0] ** 2
    return float(-np.sum(p * np.log(p)) / np.log(base)) + 0.0  # avoid -0.0


def mode_fidelity(learned, reference) -> float:
    """|<reference|learned>|^2, insensitive to global phase."""
    learned = np.asarray(learned, dtype=complex)
    reference = np.asarray(reference, dtype=complex)
    if learned.shape != reference.shape:
        raise ValueError(f"vector length mismatch: {learned.shape} vs {reference.shape}")
    return float(abs(np.vdot(reference, learned)) ** 2)


def subspace_fidelity(learned, reference_basis) -> float:
    """Mean of <v|P|v> over the learned vectors, P projecting onto span(reference_basis).

    Both arguments hold vectors as columns.
    """
    learned = np.atleast_2d(np.asarray(learned, dtype=complex).T).T
    ref = np.atleast_2d(np.asarray(reference_basis, dtype=complex).T).T
    overlaps = ref.conj().T @ learned
    return float(np.mean(np.sum(np.abs(overlaps) ** 2, axis=0)))


def crosstalk(state: State, u_a, u_b) -> float:
    """Share of coincidences landing on off-diagonal port pairs (leading square block)."""
    c = coincidence_matrix(state, u_a, u_b)
    return crosstalk_from_coincidences(c)


def crosstalk_from_coincidences(c: np.ndarray) -> float:
    n = min(c.shape)
    block = c[:n, :n]
    total = block.sum()
    if total <= 0:
        raise ValueError("total coincidence is zero; crosstalk undefined")
    return float((total - np.trace(block)) / total)


def schmidt_number(values: Sequence[float], threshold: float = SCHMIDT_THRESHOLD) -> int:
    p = np.asarray(values, dtype=float) ** 2
    total = p.sum()
    if total <= 0:
        return 0
    return int(np.count_nonzero(p > threshold * total))


def entropy_of_measured(values: Sequence[float], base: float = 2) -> float:
    """Entropy after renormalizing the measured weights lambda^2 to unit sum."""
    v = np.asarray(values, dtype=float)
    total = np.sum(v * v)
    if total <= 0:
        return 0.0
    return von_neumann_entropy(v / np.sqrt(total), base)


@dataclass
class SchmidtReport:
    values: np.ndarray
    modes_a: np.ndarray  # columns are learned mode vectors on side A
    modes_b: np.ndarray
    entropy_bits: float
    schmidt_number: int
    crosstalk: float
    method: str = ""
    fidelities_a: list[float] = field(default_factory=list)
    fidelities_b: list[float] = field(default_factory=list)
    traces: list = field(default_factory=list)
    measurements: int = 0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "values": [float(v) for v in self.values],
            "entropy_bits": float(self.entropy_bits),
            "schmidt_number": int(self.schmidt_number),
            "crosstalk": float(self.crosstalk),
            "fidelities_a": [float(f) for f in self.fidelities_a],
            "fidelities_b": [float(f) for f in self.fidelities_b],
            "measurements": int(self.measurements),
            "modes_a": complex_to_json(self.modes_a),
            "modes_b": complex_to_json(self.modes_b),
        }


def complex_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def complex_from_json(d: dict) -> np.ndarray:
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
