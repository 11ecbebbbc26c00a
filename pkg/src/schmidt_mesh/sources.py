"""Input state generators: random, SPDC biphotons, engineered degenerate and Bell states."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .linalg import ginibre, haar_unitary
from .states import StateMatrix


@dataclass(frozen=True)
class SpdcParams:
    """Discretized SPDC joint spectral amplitude on normalized detunings in [-1, 1].

    ``sigma_f = inf`` disables the spectral filter and ``gvm = (0, 0)`` turns
    off the phase-matching sinc.
    """

    n_bins: int = 32
    sigma: float = 0.1
    sigma_f: float = math.inf
    gvm: tuple[float, float] = (0.0, 0.0)
    crystal_length: float = 25.0

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if not self.sigma > 0:
            raise ValueError("pump bandwidth sigma must be positive")
        if not self.sigma_f > 0:
            raise ValueError("filter width sigma_f must be positive (or inf)")
        object.__setattr__(self, "gvm", tuple(float(x) for x in self.gvm))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gvm"] = list(self.gvm)
        d["sigma_f"] = None if math.isinf(self.sigma_f) else self.sigma_f
        return d


# analogues of the three phase-matching settings analyzed for SPDC pairs
SPDC_UNFILTERED = SpdcParams(sigma=0.1)
SPDC_FILTERED = SpdcParams(sigma=0.1, sigma_f=0.09)
SPDC_GVM = SpdcParams(sigma=0.5, sigma_f=0.2, gvm=(1.0, -1.0), crystal_length=25.0)


def frequency_grid(n_bins: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n_bins)


def spdc_jsa(params: SpdcParams = SPDC_UNFILTERED) -> StateMatrix:
    """Gaussian pump envelope x sinc phase matching x Gaussian filters, rows = signal bins."""
    nu = frequency_grid(params.n_bins)
    s, i = np.meshgrid(nu, nu, indexing="ij")
    f = np.exp(-((s + i) ** 2) / (2 * params.sigma**2))
    k_s, k_i = params.gvm
    if k_s != 0 or k_i != 0:
        arg = params.crystal_length * (k_s * s + k_i * i) / 2
        f = f * np.sinc(arg / np.pi)
    if not math.isinf(params.sigma_f):
        filt = np.exp(-(nu**2) / (2 * params.sigma_f**2))
        f = f * filt[:, None] * filt[None, :]
    return StateMatrix.normalized(f.astype(complex))


def random_state(n_a: int, n_b: int, rng: np.random.Generator) -> StateMatrix:
    if n_a < 1 or n_b < 1:
        raise ValueError("state dimensions must be >= 1")
    return StateMatrix.normalized(ginibre(n_a, n_b, rng))


def schmidt_state(values, n_a: int, n_b: int, rng: np.random.Generator) -> StateMatrix:
    """W_A diag(values) W_B^dagger with Haar-random W_A, W_B (values renormalized)."""
    values = np.asarray(values, dtype=float)
    r = len(values)
    if r > min(n_a, n_b):
        raise ValueError(f"{r} Schmidt values do not fit a {n_a}x{n_b} state")
    w_a = haar_unitary(n_a, rng)
    w_b = haar_unitary(n_b, rng)
    g = (w_a[:, :r] * values) @ w_b[:, :r].conj().T
    return StateMatrix.normalized(g)


def degenerate_state(n: int, rng: np.random.Generator, tail: float = 0.3) -> StateMatrix:
    """Exactly degenerate leading pair lambda_1 = lambda_2 plus a geometric tail."""
    if n < 2:
        raise ValueError("degenerate state needs n >= 2")
    values = np.concatenate([[1.0, 1.0], tail * 0.5 ** np.arange(n - 2)])
    return schmidt_state(values, n, n, rng)


def bell_state() -> StateMatrix:
    return StateMatrix(np.eye(2, dtype=complex) / np.sqrt(2))


def embedded_bell_state(n: int) -> StateMatrix:
    """Bell pair on the first two modes of an n x n space."""
    g = np.zeros((n, n), dtype=complex)
    g[0, 0] = g[1, 1] = 1 / np.sqrt(2)
    return StateMatrix(g)
