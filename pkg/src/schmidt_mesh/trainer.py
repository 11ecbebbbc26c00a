"""Sequential layer-by-layer self-configuration of a bipartite mesh pair.

Two procedures are provided:

* power training maximizes the single-side output power at port k of
  network A (then B), one layer at a time;
* coincidence training maximizes the pair coincidence rate on ports (k, k),
  updating layer k of both networks jointly.

Each layer objective is a Rayleigh quotient over the subspace left by the
earlier (frozen) layers, so the k-th optimum is the k-th squared Schmidt value.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .imperfections import LossModel, ShotNoiseModel, post_selected, sample_counts, single_photon_view
from .linalg import ginibre, make_rng
from .mesh import (
    MeshNetwork,
    layer_perturbed_rows,
    layer_row,
    layer_row_jacobian,
    network_unitary,
    partial_unitary,
    steer_layer_to_vector,
)
from .states import (
    SchmidtReport,
    State,
    coincidence_matrix,
    components,
    crosstalk_from_coincidences,
    entropy_of_measured,
    schmidt_number,
)


class GradientMethod(str, Enum):
    ANALYTIC = "analytic"
    DITHER = "dither"


@dataclass
class TrainingSchedule:
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    max_iters_per_layer: int = 2000
    convergence_window: int = 50
    convergence_tol: float = 1e-10
    gradient_method: GradientMethod = GradientMethod.ANALYTIC
    dither_delta: float = 1e-3
    residual_stop: float = 1e-6
    jitter: float = 0.0
    # "zero" starts at identity; "random" steers every layer to a seeded random vector
    init: str = "zero"
    seed: int = 0
    joint_updates: bool = True

    def __post_init__(self):
        self.gradient_method = GradientMethod(self.gradient_method)
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.dither_delta <= 0:
            raise ValueError("dither_delta must be positive")
        if self.init not in ("zero", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.max_iters_per_layer < 0 or self.convergence_window < 1:
            raise ValueError("iteration budget and window must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gradient_method"] = self.gradient_method.value
        return d


class Exact:
    """Exact expectation values; no sampling."""

    infinite_budget = True

    def __repr__(self):
        return "Exact()"


@dataclass
class Measurement:
    """Turns exact probabilities into what the detectors report."""

    noise: ShotNoiseModel | Exact = field(default_factory=Exact)
    loss: LossModel = field(default_factory=LossModel)
    # divide detector readings by the known output transmissions
    calibrate: bool = True
    count: int = 0

    @property
    def exact(self) -> bool:
        return isinstance(self.noise, Exact) or self.noise.infinite_budget

    def read(self, probabilities, scale: float | np.ndarray = 1.0, key: tuple = ()) -> np.ndarray:
        """Detector estimates of ``probabilities`` seen through output transmission ``scale``."""
        p = np.asarray(probabilities, dtype=float) * scale
        self.count += p.size
        if not self.exact:
            p = sample_counts(np.clip(p, 0.0, 1.0), self.noise, self.noise.stream(*key))
        return _divide(p, scale) if self.calibrate else p

    def calibrated(self, reading, scale):
        return reading if self.calibrate else _divide(reading, scale)


def _divide(x, scale):
    # dark ports (zero transmission) read as zero after calibration
    x, scale = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(scale, dtype=float))
    return np.divide(x, scale, out=np.zeros_like(x), where=scale > 0)


@dataclass
class LayerSummary:
    side: str
    layer: int
    status: str
    iterations: int
    final_objective: float
    measurements: int
    warnings: list[str] = field(default_factory=list)


@dataclass
class TrainingTrace:
    rows: list[tuple[str, int, int, float, int]] = field(default_factory=list)
    layers: list[LayerSummary] = field(default_factory=list)

    def record(self, side: str, layer: int, iteration: int, objective: float, measurements: int) -> None:
        self.rows.append((side, layer, iteration, float(objective), measurements))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["side", "layer", "iter", "objective", "sqrt_objective", "measurements_used"])
        for side, layer, it, obj, meas in self.rows:
            writer.writerow([side, layer, it, repr(obj), repr(float(np.sqrt(max(obj, 0.0)))), meas])
        return buf.getvalue()


class Adam:
    """Adam ascent on a flat parameter vector."""

    def __init__(self, n: int, lr: float, beta1: float, beta2: float, epsilon: float):
        self.lr, self.beta1, self.beta2, self.epsilon = lr, beta1, beta2, epsilon
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params + self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


# --- layer objectives -------------------------------------------------------


class PowerObjective:
    """<P_k> on one side with layers 0..k-1 frozen; free parameters are layer k's phases."""

    def __init__(self, mesh: MeshNetwork, state: State, side: str, k: int):
        self.mesh, self.side, self.k = mesh, side, k
        frozen = partial_unitary(mesh, k)
        # Hermitian reduced operator seen by layer k: M rho M^dagger
        h = 0
        for p, g in components(state):
            x = frozen @ (g if side == "A" else g.T)
            h = h + p * (x @ x.conj().T)
        self.h = h
        self.layers = [mesh.layers[k]] if k < len(mesh.layers) else []

    @property
    def n_params(self) -> int:
        return sum(2 * l.n_nodes for l in self.layers)

    def get(self) -> np.ndarray:
        return np.concatenate([l.params for l in self.layers]) if self.layers else np.zeros(0)

    def set(self, params: np.ndarray) -> None:
        if self.layers:
            self.layers[0].params = params

    def _row(self) -> np.ndarray:
        if self.layers:
            return layer_row(self.layers[0], self.mesh.dimension)
        row = np.zeros(self.mesh.dimension, dtype=complex)
        row[self.k] = 1.0
        return row

    def value(self) -> float:
        r = self._row()
        return float(np.real(r @ self.h @ r.conj()))

    def value_and_grad(self) -> tuple[float, np.ndarray]:
        row, jac = layer_row_jacobian(self.layers[0], self.mesh.dimension)
        hr = self.h @ row.conj()
        return float(np.real(row @ hr)), 2.0 * np.real(jac @ hr)

    def perturbed_values(self, delta: float) -> tuple[np.ndarray, np.ndarray]:
        _, plus, minus = layer_perturbed_rows(self.layers[0], self.mesh.dimension, delta)
        f = lambda rows: np.real(np.sum((rows @ self.h) * rows.conj(), axis=1))
        return f(plus), f(minus)


class CoincidenceObjective:
    """<C_kk> with layers 0..k-1 of both meshes frozen; layer k of each is free."""

    def __init__(self, mesh_a: MeshNetwork, mesh_b: MeshNetwork, state: State, k: int):
        self.mesh_a, self.mesh_b, self.k = mesh_a, mesh_b, k
        fa = partial_unitary(mesh_a, k)
        fb = partial_unitary(mesh_b, k)
        self.parts = [(p, fa @ g @ fb.T) for p, g in components(state)]
        self.layer_a = mesh_a.layers[k] if k < len(mesh_a.layers) else None
        self.layer_b = mesh_b.layers[k] if k < len(mesh_b.layers) else None
        self.n_a = 2 * self.layer_a.n_nodes if self.layer_a else 0
        self.n_b = 2 * self.layer_b.n_nodes if self.layer_b else 0

    @property
    def n_params(self) -> int:
        return self.n_a + self.n_b

    def get(self) -> np.ndarray:
        parts = [l.params for l in (self.layer_a, self.layer_b) if l is not None]
        return np.concatenate(parts) if parts else np.zeros(0)

    def set(self, params: np.ndarray) -> None:
        if self.layer_a is not None:
            self.layer_a.params = params[: self.n_a]
        if self.layer_b is not None:
            self.layer_b.params = params[self.n_a :]

    def _row_jac(self, layer, n):
        if layer is not None:
            return layer_row_jacobian(layer, n)
        row = np.zeros(n, dtype=complex)
        row[self.k] = 1.0
        return row, np.zeros((0, n), dtype=complex)

    def _row(self, layer, n):
        if layer is not None:
            return layer_row(layer, n)
        row = np.zeros(n, dtype=complex)
        row[self.k] = 1.0
        return row

    def value(self) -> float:
        ra = self._row(self.layer_a, self.mesh_a.dimension)
        rb = self._row(self.layer_b, self.mesh_b.dimension)
        return float(sum(p * abs(ra @ y @ rb) ** 2 for p, y in self.parts))

    def value_and_grad(self) -> tuple[float, np.ndarray]:
        ra, ja = self._row_jac(self.layer_a, self.mesh_a.dimension)
        rb, jb = self._row_jac(self.layer_b, self.mesh_b.dimension)
        f = 0.0
        grad = np.zeros(self.n_params)
        for p, y in self.parts:
            yb = y @ rb
            c = ra @ yb
            f += p * abs(c) ** 2
            grad[: self.n_a] += p * 2.0 * np.real(np.conj(c) * (ja @ yb))
            grad[self.n_a :] += p * 2.0 * np.real(np.conj(c) * (jb @ (y.T @ ra)))
        return float(f), grad

    def perturbed_values(self, delta: float) -> tuple[np.ndarray, np.ndarray]:
        na, nb = self.mesh_a.dimension, self.mesh_b.dimension
        ra = self._row(self.layer_a, na)
        rb = self._row(self.layer_b, nb)
        plus = np.zeros(self.n_params)
        minus = np.zeros(self.n_params)
        pa = ma = pb = mb = None
        if self.layer_a is not None:
            _, pa, ma = layer_perturbed_rows(self.layer_a, na, delta)
        if self.layer_b is not None:
            _, pb, mb = layer_perturbed_rows(self.layer_b, nb, delta)
        for p, y in self.parts:
            if pa is not None:
                yb = y @ rb
                plus[: self.n_a] += p * np.abs(pa @ yb) ** 2
                minus[: self.n_a] += p * np.abs(ma @ yb) ** 2
            if pb is not None:
                ya = y.T @ ra
                plus[self.n_a :] += p * np.abs(pb @ ya) ** 2
                minus[self.n_a :] += p * np.abs(mb @ ya) ** 2
        return plus, minus


def analytic_gradient(objective, measurement: Measurement | None = None) -> np.ndarray:
    if measurement is not None and not measurement.exact:
        raise ValueError("analytic gradients need exact expectations; use the dither method under shot noise")
    return objective.value_and_grad()[1]


def dither_gradient(objective, delta: float, measurement: Measurement | None = None,
                    scale: float = 1.0, key: tuple = ()) -> np.ndarray:
    """Symmetric-difference gradient (f(p+d) - f(p-d)) / 2d from measured objectives."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    measurement = Measurement() if measurement is None else measurement
    plus, minus = objective.perturbed_values(delta)
    measured = measurement.read(np.concatenate([plus, minus]), scale, key)
    n = len(plus)
    return (measured[:n] - measured[n:]) / (2.0 * delta)


# --- training loops -----------------------------------------------------------


def _gradient_step(objective, schedule: TrainingSchedule, measurement: Measurement, scale: float, key: tuple):
    if schedule.gradient_method is GradientMethod.ANALYTIC:
        if not measurement.exact:
            raise ValueError("analytic gradients need exact expectations; use the dither method under shot noise")
        _, grad = objective.value_and_grad()
        return grad if measurement.calibrate else grad * scale
    return dither_gradient(objective, schedule.dither_delta, measurement, scale, key)


def train_layer(objective, schedule: TrainingSchedule, measurement: Measurement, trace: TrainingTrace,
                side: str, k: int, scale: float = 1.0, stream: int = 0, stop=None) -> LayerSummary:
    """Adam ascent on one layer objective until the relative-change window test passes.

    ``stop(iteration) -> bool`` may end training early (used for scaling runs).
    """
    start = measurement.count
    history: list[float] = []
    notes: list[str] = []
    status = "max_iters"

    def readout(it):
        return float(measurement.read([objective.value()], scale, (stream, k, it, 1))[0])

    if objective.n_params == 0:
        value = readout(0)
        trace.record(side, k, 0, value, measurement.count - start)
        summary = LayerSummary(side, k, "fixed", 0, value, measurement.count - start)
        trace.layers.append(summary)
        return summary

    adam = Adam(objective.n_params, schedule.learning_rate, schedule.beta1, schedule.beta2, schedule.adam_epsilon)
    params = objective.get()
    window = schedule.convergence_window
    falling = 0
    it = 0
    for it in range(schedule.max_iters_per_layer):
        value = readout(it)
        history.append(value)
        trace.record(side, k, it, value, measurement.count - start)
        if stop is not None and stop(it):
            status = "target"
            break
        if len(history) > window:
            old = history[-1 - window]
            if abs(value - old) <= schedule.convergence_tol * max(abs(value), 1e-300):
                status = "converged"
                break
            falling = falling + 1 if value < history[-2] else 0
            if falling == 10 * window:
                notes.append("objective decreasing persistently; learning rate may be too large")
        grad = _gradient_step(objective, schedule, measurement, scale, (stream, k, it, 0))
        params = adam.step(params, grad)
        objective.set(params)
        params = objective.get()
    else:
        it = schedule.max_iters_per_layer
        value = readout(it)
        trace.record(side, k, it, value, measurement.count - start)
    summary = LayerSummary(side, k, status, it, value, measurement.count - start, notes)
    trace.layers.append(summary)
    return summary


def _init_meshes(mesh_a: MeshNetwork, mesh_b: MeshNetwork, schedule: TrainingSchedule):
    mesh_a, mesh_b = mesh_a.copy(), mesh_b.copy()
    rng = make_rng(schedule.seed)
    if schedule.init == "random":
        for mesh in (mesh_a, mesh_b):
            for layer in mesh.layers:
                v = ginibre(mesh.dimension - layer.output_port, 1, rng)[:, 0]
                layer.params = steer_layer_to_vector(layer, v)
    if schedule.jitter > 0:
        mesh_a.jitter(rng, schedule.jitter)
        mesh_b.jitter(rng, schedule.jitter)
    return mesh_a, mesh_b


def _check_sizes(mesh_a: MeshNetwork, mesh_b: MeshNetwork, state: State) -> None:
    if (mesh_a.dimension, mesh_b.dimension) != state.shape:
        raise ValueError(f"mesh sizes ({mesh_a.dimension}, {mesh_b.dimension}) do not match state {state.shape}")


def learned_modes(mesh: MeshNetwork) -> np.ndarray:
    """Mode vectors as columns: conj of the network unitary's rows.

    Side A gives the left singular vectors U; side B gives V^*, the
    coefficients of the B-side Schmidt kets.
    """
    return network_unitary(mesh).conj().T


@dataclass
class TrainingResult:
    report: SchmidtReport
    mesh_a: MeshNetwork
    mesh_b: MeshNetwork
    trace: TrainingTrace
    values_b: np.ndarray | None = None
    coincidences: np.ndarray | None = None


def _output_scales(loss: LossModel, n_a: int, n_b: int) -> dict[str, np.ndarray]:
    eta = loss.resolve(n_a, n_b)
    return {"a": eta["output_a"] ** 2, "b": eta["output_b"] ** 2}


def _final_coincidences(state, mesh_a, mesh_b, measurement: Measurement, stream: int) -> np.ndarray:
    if measurement.loss.has_input_loss:
        state = post_selected(state, measurement.loss)
    exact = coincidence_matrix(state, network_unitary(mesh_a), network_unitary(mesh_b))
    n_a, n_b = exact.shape
    scales = _output_scales(measurement.loss, n_a, n_b)
    return measurement.read(exact, np.outer(scales["a"], scales["b"]), (stream, 10**6, 0, 2))


def sequential_power_training(mesh_a: MeshNetwork, mesh_b: MeshNetwork, state: State,
                              schedule: TrainingSchedule | None = None,
                              measurement: Measurement | None = None, stop_factory=None) -> TrainingResult:
    """Train A-layers on <P^A_k>, then B-layers on <P^B_k>, k = 0, 1, ..."""
    schedule = schedule or TrainingSchedule()
    measurement = measurement or Measurement()
    _check_sizes(mesh_a, mesh_b, state)
    mesh_a, mesh_b = _init_meshes(mesh_a, mesh_b, schedule)
    n_a, n_b = state.shape
    scales = _output_scales(measurement.loss, n_a, n_b)
    trace = TrainingTrace()
    side_values = {}
    for side, mesh, n, stream in (("A", mesh_a, n_a, 1), ("B", mesh_b, n_b, 2)):
        scale = scales[side.lower()]
        seen = single_photon_view(state, measurement.loss, side) if measurement.loss.has_input_loss else state
        values = np.zeros(n)
        mesh.trained_depth = 0
        for k in range(n):
            objective = PowerObjective(mesh, seen, side, k)
            # power left on ports k..n-1, read as one measurement
            ports = np.real(np.diagonal(objective.h)[k:])
            rest = float(np.sum(measurement.calibrated(measurement.read(ports, scale[k:], (stream, k, 0, 3)), scale[k:])))
            if rest < schedule.residual_stop:
                trace.layers.append(LayerSummary(side, k, "null space", 0, float(rest), 1))
                break
            stop = stop_factory(side, k, mesh) if stop_factory else None
            summary = train_layer(objective, schedule, measurement, trace, side, k, float(scale[k]), stream, stop)
            values[k] = np.sqrt(max(measurement.calibrated(summary.final_objective, scale[k]), 0.0))
            mesh.trained_depth = min(k + 1, len(mesh.layers))
        side_values[side] = values

    coinc = _final_coincidences(state, mesh_a, mesh_b, measurement, 3)
    calibrated = measurement.calibrated(coinc, np.outer(scales["a"], scales["b"]))
    values = side_values["A"]
    report = SchmidtReport(
        values=values,
        modes_a=learned_modes(mesh_a),
        modes_b=learned_modes(mesh_b),
        entropy_bits=entropy_of_measured(values),
        schmidt_number=schmidt_number(values),
        crosstalk=crosstalk_from_coincidences(calibrated),
        method="power",
        traces=trace.layers,
        measurements=measurement.count,
    )
    return TrainingResult(report, mesh_a, mesh_b, trace, values_b=side_values["B"], coincidences=calibrated)


def sequential_coincidence_training(mesh_a: MeshNetwork, mesh_b: MeshNetwork, state: State,
                                    schedule: TrainingSchedule | None = None,
                                    measurement: Measurement | None = None, stop_factory=None) -> TrainingResult:
    """Jointly train layer k of both meshes on <C_kk>, k = 0 .. min(N_A, N_B) - 1."""
    schedule = schedule or TrainingSchedule()
    measurement = measurement or Measurement()
    _check_sizes(mesh_a, mesh_b, state)
    mesh_a, mesh_b = _init_meshes(mesh_a, mesh_b, schedule)
    n_a, n_b = state.shape
    scales = _output_scales(measurement.loss, n_a, n_b)
    # pair events only register when both photons survive
    seen = post_selected(state, measurement.loss) if measurement.loss.has_input_loss else state
    trace = TrainingTrace()
    n_modes = min(n_a, n_b)
    values = np.zeros(n_modes)
    mesh_a.trained_depth = mesh_b.trained_depth = 0
    for k in range(n_modes):
        objective = CoincidenceObjective(mesh_a, mesh_b, seen, k)
        weights = np.outer(scales["a"][k:], scales["b"][k:])
        ports = sum(p * np.abs(y[k:, k:]) ** 2 for p, y in objective.parts)
        rest = float(np.sum(measurement.calibrated(measurement.read(ports, weights, (0, k, 0, 3)), weights)))
        if rest < schedule.residual_stop:
            trace.layers.append(LayerSummary("AB", k, "null space", 0, float(rest), 1))
            break
        scale = float(scales["a"][k] * scales["b"][k])
        stop = stop_factory("AB", k, (mesh_a, mesh_b)) if stop_factory else None
        if schedule.joint_updates or objective.n_a == 0 or objective.n_b == 0:
            summary = train_layer(objective, schedule, measurement, trace, "AB", k, scale, 0, stop)
        else:
            summary = _train_alternating(objective, schedule, measurement, trace, k, scale)
        values[k] = np.sqrt(max(measurement.calibrated(summary.final_objective, scale), 0.0))
        mesh_a.trained_depth = min(k + 1, len(mesh_a.layers))
        mesh_b.trained_depth = min(k + 1, len(mesh_b.layers))

    coinc = _final_coincidences(state, mesh_a, mesh_b, measurement, 3)
    calibrated = measurement.calibrated(coinc, np.outer(scales["a"], scales["b"]))
    report = SchmidtReport(
        values=values,
        modes_a=learned_modes(mesh_a),
        modes_b=learned_modes(mesh_b),
        entropy_bits=entropy_of_measured(values),
        schmidt_number=schmidt_number(values),
        crosstalk=crosstalk_from_coincidences(calibrated),
        method="coincidence",
        traces=trace.layers,
        measurements=measurement.count,
    )
    return TrainingResult(report, mesh_a, mesh_b, trace, coincidences=calibrated)


class _Block:
    """View of a CoincidenceObjective exposing only one network's parameters."""

    def __init__(self, objective: CoincidenceObjective, side: str):
        self.objective, self.side = objective, side
        o = objective
        self.sl = slice(0, o.n_a) if side == "A" else slice(o.n_a, o.n_params)
        self.n_params = o.n_a if side == "A" else o.n_b

    def get(self):
        return self.objective.get()[self.sl]

    def set(self, params):
        full = self.objective.get()
        full[self.sl] = params
        self.objective.set(full)

    def value(self):
        return self.objective.value()

    def value_and_grad(self):
        f, g = self.objective.value_and_grad()
        return f, g[self.sl]

    def perturbed_values(self, delta):
        plus, minus = self.objective.perturbed_values(delta)
        return plus[self.sl], minus[self.sl]


def _train_alternating(objective, schedule, measurement, trace, k, scale, rounds: int = 20):
    """Block-coordinate variant: alternate A-only and B-only Adam runs."""
    sub = TrainingSchedule(**{**schedule.to_dict(), "max_iters_per_layer": max(schedule.max_iters_per_layer // rounds, 1)})
    summary = None
    previous = None
    iterations = 0
    start = measurement.count
    for r in range(rounds):
        for side in ("A", "B"):
            summary = train_layer(_Block(objective, side), sub, measurement, TrainingTrace(), "AB", k, scale, 10 + r)
            trace.record("AB", k, iterations + summary.iterations, summary.final_objective, measurement.count - start)
            iterations += summary.iterations
        if previous is not None and abs(summary.final_objective - previous) <= schedule.convergence_tol * summary.final_objective:
            break
        previous = summary.final_objective
    result = LayerSummary("AB", k, "converged" if r < rounds - 1 else "max_iters", iterations,
                          summary.final_objective, measurement.count - start)
    trace.layers.append(result)
    return result
