"""Self-configuring MZI layer cascades and the unitaries they impart.

Node convention (phase shifter on the top input arm)::

    T(theta, phi) = [[e^{i phi} cos(theta), -sin(theta)],
                     [e^{i phi} sin(theta),  cos(theta)]]

Layer ``k`` funnels modes ``k..N-1`` into its output port ``k``; every input
reaches that port through exactly one chain of nodes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * np.pi


class Topology(str, Enum):
    DIAGONAL = "diagonal"
    TREE = "tree"


@dataclass(frozen=True)
class MziNode:
    top: int
    bottom: int
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.top == self.bottom or min(self.top, self.bottom) < 0:
            raise ValueError(f"invalid node ports ({self.top}, {self.bottom})")

    def unitary(self) -> np.ndarray:
        return mzi_unitary(self.theta, self.phi)


def wrap(phases: np.ndarray) -> np.ndarray:
    return np.mod(phases, TWO_PI)


def mzi_unitary(theta: float, phi: float) -> np.ndarray:
    c, s, e = np.cos(theta), np.sin(theta), np.exp(1j * phi)
    return np.array([[e * c, -s], [e * s, c]])


def _mzi_batch(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    c, s, e = np.cos(theta), np.sin(theta), np.exp(1j * phi)
    out = np.empty((len(theta), 2, 2), dtype=complex)
    out[:, 0, 0] = e * c
    out[:, 0, 1] = -s
    out[:, 1, 0] = e * s
    out[:, 1, 1] = c
    return out


def layer_pairs(n: int, k: int, topology: Topology | str = Topology.DIAGONAL) -> list[tuple[int, int]]:
    """Node port pairs, in application order, for layer ``k`` of an ``n``-mode mesh."""
    topology = Topology(topology)
    if topology is Topology.DIAGONAL:
        return [(m, m + 1) for m in range(n - 2, k - 1, -1)]
    # binary tree over modes k..n-1; unpaired modes pass through to the next level
    pairs = []
    size = n - k
    stride = 1
    while stride < size:
        for i in range(0, size, 2 * stride):
            if i + stride < size:
                pairs.append((k + i, k + i + stride))
        stride *= 2
    return pairs


@dataclass
class SelfConfiguringLayer:
    output_port: int
    pairs: list[tuple[int, int]]
    theta: np.ndarray = None
    phi: np.ndarray = None
    topology: Topology = Topology.DIAGONAL

    def __post_init__(self):
        n_nodes = len(self.pairs)
        for top, bottom in self.pairs:
            if top == bottom:
                raise ValueError(f"node couples port {top} to itself")
        self.theta = wrap(np.zeros(n_nodes) if self.theta is None else np.asarray(self.theta, dtype=float))
        self.phi = wrap(np.zeros(n_nodes) if self.phi is None else np.asarray(self.phi, dtype=float))
        if self.theta.shape != (n_nodes,) or self.phi.shape != (n_nodes,):
            raise ValueError("phase arrays must have one entry per node")
        self.topology = Topology(self.topology)

    @property
    def n_nodes(self) -> int:
        return len(self.pairs)

    @property
    def nodes(self) -> list[MziNode]:
        return [MziNode(t, b, float(th), float(ph)) for (t, b), th, ph in zip(self.pairs, self.theta, self.phi)]

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.theta, self.phi])

    @params.setter
    def params(self, values) -> None:
        values = wrap(np.asarray(values, dtype=float))
        self.theta = values[: self.n_nodes].copy()
        self.phi = values[self.n_nodes :].copy()

    def copy(self) -> SelfConfiguringLayer:
        return SelfConfiguringLayer(self.output_port, list(self.pairs), self.theta.copy(), self.phi.copy(), self.topology)


def make_layer(n: int, k: int, topology: Topology | str = Topology.DIAGONAL) -> SelfConfiguringLayer:
    return SelfConfiguringLayer(output_port=k, pairs=layer_pairs(n, k, topology), topology=Topology(topology))


def layer_unitary(layer: SelfConfiguringLayer, n: int) -> np.ndarray:
    u = np.eye(n, dtype=complex)
    for (top, bottom), t in zip(layer.pairs, _mzi_batch(layer.theta, layer.phi)):
        if not (0 <= top < n and 0 <= bottom < n):
            raise ValueError(f"node ports ({top}, {bottom}) out of range for n={n}")
        idx = [top, bottom]
        u[idx, :] = t @ u[idx, :]
    return u


@dataclass
class MeshNetwork:
    dimension: int
    layers: list[SelfConfiguringLayer] = field(default_factory=list)
    topology: Topology = Topology.DIAGONAL
    trained_depth: int = 0

    @classmethod
    def build(cls, n: int, topology: Topology | str = Topology.DIAGONAL, n_layers: int | None = None) -> MeshNetwork:
        if n < 1:
            raise ValueError("mesh dimension must be >= 1")
        n_layers = n - 1 if n_layers is None else n_layers
        if not 0 <= n_layers <= max(n - 1, 0):
            raise ValueError(f"a {n}-mode mesh holds at most {n - 1} layers")
        topology = Topology(topology)
        return cls(n, [make_layer(n, k, topology) for k in range(n_layers)], topology)

    @property
    def n_mzis(self) -> int:
        return sum(layer.n_nodes for layer in self.layers)

    @property
    def readable_modes(self) -> int:
        """Number of output ports whose mode is fixed by trained layers."""
        if self.trained_depth >= self.dimension - 1 and len(self.layers) >= self.dimension - 1:
            return self.dimension
        return self.trained_depth

    def copy(self) -> MeshNetwork:
        return MeshNetwork(self.dimension, [l.copy() for l in self.layers], self.topology, self.trained_depth)

    def jitter(self, rng: np.random.Generator, scale: float = 0.1) -> None:
        for layer in self.layers:
            layer.params = layer.params + rng.uniform(-scale, scale, 2 * layer.n_nodes)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "topology": self.topology.value,
            "layers": [
                {
                    "output_port": layer.output_port,
                    "nodes": [
                        {"top": n.top, "bottom": n.bottom, "theta": n.theta, "phi": n.phi} for n in layer.nodes
                    ],
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> MeshNetwork:
        topology = Topology(data["topology"])
        layers = []
        for entry in data["layers"]:
            nodes = entry["nodes"]
            layers.append(
                SelfConfiguringLayer(
                    output_port=int(entry["output_port"]),
                    pairs=[(int(n["top"]), int(n["bottom"])) for n in nodes],
                    theta=np.array([float(n["theta"]) for n in nodes]),
                    phi=np.array([float(n["phi"]) for n in nodes]),
                    topology=topology,
                )
            )
        return cls(int(data["dimension"]), layers, topology)

    def to_json(self) -> str:
        # repr-based float output round-trips bit-exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> MeshNetwork:
        return cls.from_dict(json.loads(text))


def network_unitary(mesh: MeshNetwork) -> np.ndarray:
    """Product L_{r-1} ... L_1 L_0 (layer 0 acts first on the input)."""
    u = np.eye(mesh.dimension, dtype=complex)
    for layer in mesh.layers:
        u = layer_unitary(layer, mesh.dimension) @ u
    return u


def partial_unitary(mesh: MeshNetwork, n_layers: int) -> np.ndarray:
    u = np.eye(mesh.dimension, dtype=complex)
    for layer in mesh.layers[:n_layers]:
        u = layer_unitary(layer, mesh.dimension) @ u
    return u


def steer_layer_to_vector(layer: SelfConfiguringLayer, target) -> np.ndarray:
    """Phases that route ``target`` (amplitudes on modes k..N-1) into the layer's output port.

    Each node nulls its bottom output, sending the accumulated amplitude
    upward. Returns the layer parameter vector ``[thetas, phis]``.
    """
    target = np.asarray(target, dtype=complex)
    norm = np.linalg.norm(target)
    if norm == 0:
        raise ValueError("cannot steer a zero vector")
    k = layer.output_port
    amps = np.zeros(k + len(target), dtype=complex)
    amps[k:] = target / norm
    theta = np.zeros(layer.n_nodes)
    phi = np.zeros(layer.n_nodes)
    for i, (top, bottom) in enumerate(layer.pairs):
        a, b = amps[top], amps[bottom]
        if abs(b) == 0:
            th, ph = 0.0, 0.0
        elif abs(a) == 0:
            th, ph = np.pi / 2, 0.0
        else:
            th = np.arctan2(abs(b), abs(a))
            ph = np.angle(-b) - np.angle(a)
        theta[i], phi[i] = th, ph
        t = mzi_unitary(th, ph)
        amps[top], amps[bottom] = t[0, 0] * a + t[0, 1] * b, 0.0
    return wrap(np.concatenate([theta, phi]))


def layer_row(layer: SelfConfiguringLayer, n: int) -> np.ndarray:
    """Output row e_k^T L of the layer unitary."""
    left = np.zeros(n, dtype=complex)
    left[layer.output_port] = 1.0
    c, s, e = np.cos(layer.theta).tolist(), np.sin(layer.theta).tolist(), np.exp(1j * layer.phi).tolist()
    for i in range(len(layer.pairs) - 1, -1, -1):
        top, bottom = layer.pairs[i]
        l0, l1 = left[top], left[bottom]
        left[top] = (l0 * c[i] + l1 * s[i]) * e[i]
        left[bottom] = -l0 * s[i] + l1 * c[i]
    return left


def _forward_rows(layer: SelfConfiguringLayer, n: int):
    """Rows of the partial products T_{i-1}...T_0 at each node's ports (before node i)."""
    c, s, e = np.cos(layer.theta).tolist(), np.sin(layer.theta).tolist(), np.exp(1j * layer.phi).tolist()
    partial = np.eye(n, dtype=complex)
    saved = []
    for i, (top, bottom) in enumerate(layer.pairs):
        a = partial[top].copy()
        b = partial[bottom].copy()
        saved.append((a, b))
        ea = e[i] * a
        partial[top] = c[i] * ea - s[i] * b
        partial[bottom] = s[i] * ea + c[i] * b
    return partial[layer.output_port].copy(), saved, (c, s, e)


def layer_row_jacobian(layer: SelfConfiguringLayer, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Output row of the layer unitary and its derivative w.r.t. ``layer.params``.

    Each phase sits in exactly one 2x2 factor, so the derivative swaps that
    factor for its parameter derivative. Returns ``(row, jac)`` with shapes
    ``(n,)`` and ``(2 * n_nodes, n)``.
    """
    m = len(layer.pairs)
    row, saved, (c, s, e) = _forward_rows(layer, n)
    jac = np.empty((2 * m, n), dtype=complex)
    # backward: left vector e_k^T T_{m-1}...T_{i+1}
    left = np.zeros(n, dtype=complex)
    left[layer.output_port] = 1.0
    for i in range(m - 1, -1, -1):
        top, bottom = layer.pairs[i]
        l0, l1 = left[top], left[bottom]
        a, b = saved[i]
        # l @ dT/dtheta and l @ dT/dphi
        jac[i] = (e[i] * (-l0 * s[i] + l1 * c[i])) * a + (-l0 * c[i] - l1 * s[i]) * b
        jac[m + i] = (1j * e[i] * (l0 * c[i] + l1 * s[i])) * a
        left[top] = (l0 * c[i] + l1 * s[i]) * e[i]
        left[bottom] = -l0 * s[i] + l1 * c[i]
    return row, jac


def layer_perturbed_rows(layer: SelfConfiguringLayer, n: int, delta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Output rows with each parameter shifted by +delta and -delta.

    Returns ``(row, plus, minus)``; ``plus[p]`` is the row with parameter ``p``
    raised by ``delta``.
    """
    m = len(layer.pairs)
    row, saved, (c, s, e) = _forward_rows(layer, n)
    cp, sp = np.cos(layer.theta + delta).tolist(), np.sin(layer.theta + delta).tolist()
    cm, sm = np.cos(layer.theta - delta).tolist(), np.sin(layer.theta - delta).tolist()
    ep, em = np.exp(1j * (layer.phi + delta)).tolist(), np.exp(1j * (layer.phi - delta)).tolist()
    plus = np.empty((2 * m, n), dtype=complex)
    minus = np.empty((2 * m, n), dtype=complex)
    left = np.zeros(n, dtype=complex)
    left[layer.output_port] = 1.0

    def contrib(l0, l1, ci, si, ei, a, b):
        return ((l0 * ci + l1 * si) * ei) * a + (-l0 * si + l1 * ci) * b

    for i in range(m - 1, -1, -1):
        top, bottom = layer.pairs[i]
        l0, l1 = left[top], left[bottom]
        a, b = saved[i]
        base = row - contrib(l0, l1, c[i], s[i], e[i], a, b)
        plus[i] = base + contrib(l0, l1, cp[i], sp[i], e[i], a, b)
        minus[i] = base + contrib(l0, l1, cm[i], sm[i], e[i], a, b)
        plus[m + i] = base + contrib(l0, l1, c[i], s[i], ep[i], a, b)
        minus[m + i] = base + contrib(l0, l1, c[i], s[i], em[i], a, b)
        left[top] = (l0 * c[i] + l1 * s[i]) * e[i]
        left[bottom] = -l0 * s[i] + l1 * c[i]
    return row, plus, minus
