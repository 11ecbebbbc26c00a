"""Photon loss, finite-count measurement noise and mixed inputs.

Loss acts on post-selected statistics: amplitudes are scaled by per-port
transmissions and renormalized, which is exact for pair-detection events.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import make_rng
from .states import EnsembleState, State, StateMatrix, components


class EmptyMeasurementError(ValueError):
    pass


def _transmissions(eta, n: int, name: str) -> np.ndarray:
    if eta is None:
        return np.ones(n)
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (n,)).copy()
    if np.any(eta < 0) or np.any(eta > 1):
        raise ValueError(f"{name} transmissions must lie in [0, 1]")
    return eta


@dataclass(frozen=True)
class LossModel:
    """Per-port amplitude transmissions; ``None`` means lossless."""

    input_a: Sequence[float] | float | None = None
    input_b: Sequence[float] | float | None = None
    output_a: Sequence[float] | float | None = None
    output_b: Sequence[float] | float | None = None

    def resolve(self, n_a: int, n_b: int) -> dict[str, np.ndarray]:
        return {
            "input_a": _transmissions(self.input_a, n_a, "input_a"),
            "input_b": _transmissions(self.input_b, n_b, "input_b"),
            "output_a": _transmissions(self.output_a, n_a, "output_a"),
            "output_b": _transmissions(self.output_b, n_b, "output_b"),
        }

    @property
    def has_input_loss(self) -> bool:
        return self.input_a is not None or self.input_b is not None

    @property
    def has_output_loss(self) -> bool:
        return self.output_a is not None or self.output_b is not None


def apply_input_loss(state: StateMatrix, loss: LossModel) -> tuple[StateMatrix, float]:
    """Post-selected state T_A G T_B and the pair survival probability."""
    n_a, n_b = state.shape
    eta = loss.resolve(n_a, n_b)
    if not np.any(eta["input_a"] > 0) or not np.any(eta["input_b"] > 0):
        raise ValueError("all input transmissions on one side are zero")
    g = eta["input_a"][:, None] * state.g * eta["input_b"][None, :]
    survival = float(np.linalg.norm(g) ** 2)
    if survival == 0:
        raise ValueError("no photon pair survives the input losses")
    return StateMatrix.normalized(g), survival


def apply_output_loss(values: np.ndarray, loss: LossModel, kind: str = "coincidence") -> np.ndarray:
    """Scale coincidences C_jk by eta_A,j^2 eta_B,k^2 (or powers by eta^2 of their side).

    ``kind`` is ``"coincidence"`` (2-D), ``"power_a"`` or ``"power_b"`` (1-D).
    """
    values = np.asarray(values, dtype=float)
    if kind == "coincidence":
        n_a, n_b = values.shape
        eta = loss.resolve(n_a, n_b)
        return values * np.outer(eta["output_a"] ** 2, eta["output_b"] ** 2)
    n = values.shape[0]
    if kind == "power_a":
        return values * _transmissions(loss.output_a, n, "output_a") ** 2
    if kind == "power_b":
        return values * _transmissions(loss.output_b, n, "output_b") ** 2
    raise ValueError(f"unknown observable kind {kind!r}")


@dataclass(frozen=True)
class ShotNoiseModel:
    """Poisson-distributed counts with ``pairs_per_evaluation`` mean pairs per measurement."""

    pairs_per_evaluation: float = 1e6
    seed: int = 0
    infinite_budget: bool = False

    def __post_init__(self):
        if not self.infinite_budget and not self.pairs_per_evaluation >= 1:
            raise EmptyMeasurementError("empty measurement: pairs_per_evaluation must be >= 1")

    def stream(self, *key: int) -> np.random.Generator:
        # one independent stream per (layer, iteration, ...) key
        return make_rng(np.random.SeedSequence([self.seed, *[int(k) for k in key]]))


def sample_counts(probabilities, model: ShotNoiseModel, rng: np.random.Generator | None = None) -> np.ndarray:
    """Objective estimates count / budget, counts ~ Poisson(p * budget)."""
    p = np.asarray(probabilities, dtype=float)
    if model.infinite_budget:
        return p.copy()
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-9):
        raise ValueError("probabilities must lie in [0, 1]")
    rng = model.stream() if rng is None else rng
    budget = model.pairs_per_evaluation
    counts = rng.poisson(np.clip(p, 0.0, None) * budget)
    return counts / budget


def mixed_input(parts: Sequence[tuple[float, StateMatrix]]) -> EnsembleState:
    return EnsembleState(tuple(parts))


def _reweighted(parts: list[tuple[float, np.ndarray]]) -> State:
    """Renormalize an ensemble of unnormalized amplitude matrices (post-selection)."""
    weights = np.array([p * np.linalg.norm(g) ** 2 for p, g in parts])
    if weights.sum() == 0:
        raise ValueError("no detection event survives the input losses")
    weights = weights / weights.sum()
    kept = [(w, StateMatrix.normalized(g)) for w, (_, g) in zip(weights, parts) if w > 0]
    if len(kept) == 1:
        return kept[0][1]
    return EnsembleState(tuple(kept))


def _distortion(eta: np.ndarray) -> np.ndarray | None:
    """Per-port profile that survives renormalization; None when the loss is a uniform scalar."""
    if np.all(eta == eta[0]) and eta[0] > 0:
        return None
    return eta


def post_selected(state: State, loss: LossModel) -> State:
    """State conditioned on both photons surviving the input losses.

    Uniform transmissions on a side scale every amplitude alike and cancel on
    renormalization, so they are skipped rather than multiplied through.
    """
    n_a, n_b = state.shape
    eta = loss.resolve(n_a, n_b)
    if not np.any(eta["input_a"] > 0) or not np.any(eta["input_b"] > 0):
        raise ValueError("all input transmissions on one side are zero")
    ta, tb = _distortion(eta["input_a"]), _distortion(eta["input_b"])
    if ta is None and tb is None:
        return state
    ta = np.ones(n_a) if ta is None else ta
    tb = np.ones(n_b) if tb is None else tb
    return _reweighted([(p, ta[:, None] * g * tb[None, :]) for p, g in components(state)])


def single_photon_view(state: State, loss: LossModel, side: str) -> State:
    """What single-photon power detection on one side sees.

    A photon on side A is counted whether or not its partner survived, so only
    the side-A input transmissions distort the reduced state.
    """
    n_a, n_b = state.shape
    eta = loss.resolve(n_a, n_b)
    if _distortion(eta["input_a" if side == "A" else "input_b"]) is None:
        return state
    if side == "A":
        parts = [(p, eta["input_a"][:, None] * g) for p, g in components(state)]
    else:
        parts = [(p, g * eta["input_b"][None, :]) for p, g in components(state)]
    return _reweighted(parts)
