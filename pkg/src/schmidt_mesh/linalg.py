"""Dense complex linear algebra, seeded randomness and the Jacobi SVD oracle.

The oracle here is deliberately written from scratch (cyclic one-sided
Jacobi) so that it shares no code path with the variational trainer it is
used to validate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_RANK_EPSILON = 1e-9
MAX_SWEEPS = 100


class SvdConvergenceError(RuntimeError):
    def __init__(self, sweeps: int, residual: float):
        super().__init__(
            f"Jacobi SVD did not converge after {sweeps} sweeps "
            f"(residual off-diagonal norm {residual:.3e})"
        )
        self.sweeps = sweeps
        self.residual = residual


@dataclass(frozen=True)
class SvdResult:
    left: np.ndarray  # (n_a, r)
    values: np.ndarray  # (r,), descending
    right: np.ndarray  # (n_b, r)

    @property
    def rank(self) -> int:
        return len(self.values)

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.values) @ self.right.conj().T


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def make_rng(seed: int | np.random.SeedSequence | None = None) -> np.random.Generator:
    """PCG64 generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(seed))


def ginibre(n_rows: int, n_cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal((n_rows, n_cols)) + 1j * rng.standard_normal((n_rows, n_cols))) / np.sqrt(2)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed n x n unitary (QR of a Ginibre sample, phases fixed)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    q, r = np.linalg.qr(ginibre(n, n, rng))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def svd_oracle(g, rank_epsilon: float = DEFAULT_RANK_EPSILON, tol: float = 1e-15,
               max_sweeps: int = MAX_SWEEPS) -> SvdResult:
    """Singular value decomposition by cyclic one-sided (Hestenes) Jacobi rotations.

    Columns of ``g`` are rotated pairwise until mutually orthogonal; the column
    norms are then the singular values. Values at or below ``rank_epsilon`` are
    dropped.
    """
    if rank_epsilon <= 0:
        raise ValueError("rank_epsilon must be positive")
    a = as_matrix(g, "g")
    if a.shape[1] > a.shape[0]:
        r = svd_oracle(a.conj().T, rank_epsilon, tol, max_sweeps)
        return SvdResult(left=r.right, values=r.values, right=r.left)
    a = a.copy()
    n_rows, n_cols = a.shape
    v = np.eye(n_cols, dtype=complex)
    # pairs involving numerically null columns are left alone
    floor = (np.finfo(float).eps * max(np.linalg.norm(a), np.finfo(float).tiny)) ** 2

    for sweep in range(1, max_sweeps + 1):
        off = 0.0
        for i in range(n_cols - 1):
            for j in range(i + 1, n_cols):
                ai = a[:, i]
                aj = a[:, j]
                alpha = np.vdot(ai, ai).real
                beta = np.vdot(aj, aj).real
                gamma = np.vdot(ai, aj)
                mag = abs(gamma)
                if min(alpha, beta) <= floor or mag <= tol * np.sqrt(alpha * beta):
                    continue
                off = max(off, mag / np.sqrt(alpha * beta))
                # rotate aj's phase so the 2x2 Gram block is real symmetric
                phase = gamma / mag
                zeta = (beta - alpha) / (2.0 * mag)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                aj_rot = aj / phase
                a[:, i], a[:, j] = c * ai - s * aj_rot, s * ai + c * aj_rot
                vi = v[:, i]
                vj_rot = v[:, j] / phase
                v[:, i], v[:, j] = c * vi - s * vj_rot, s * vi + c * vj_rot
        if off <= tol:
            break
    else:
        raise SvdConvergenceError(max_sweeps, _off_diagonal_norm(a))

    norms = np.linalg.norm(a, axis=0)
    order = np.argsort(-norms, kind="stable")
    keep = [i for i in order if norms[i] > rank_epsilon]
    values = norms[keep]
    left = a[:, keep] / values if keep else np.zeros((n_rows, 0), dtype=complex)
    return SvdResult(left=left, values=values, right=v[:, keep])


def _off_diagonal_norm(a: np.ndarray) -> float:
    gram = a.conj().T @ a
    return float(np.linalg.norm(gram - np.diag(np.diagonal(gram))))
