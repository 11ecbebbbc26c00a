"""Oracle comparison, report diffs, state CSV I/O and SVG heatmaps."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .linalg import svd_oracle
from .states import SchmidtReport, StateMatrix, entropy_of_measured, mode_fidelity, subspace_fidelity

DEGENERACY_TOL = 1e-6


def _degenerate_groups(values: np.ndarray, tol: float) -> list[list[int]]:
    groups: list[list[int]] = []
    for k, v in enumerate(values):
        if groups and abs(values[groups[-1][0]] - v) <= tol * max(values[0], 1e-300):
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def oracle_comparison(report: SchmidtReport, g: np.ndarray, degeneracy_tol: float = DEGENERACY_TOL) -> dict:
    """Compare a trained report with the SVD of ``g`` and fill in the report's fidelities.

    Within a degenerate group of oracle values the modes are only defined up to
    a rotation, so each learned mode is scored by its overlap with the group's span.
    """
    oracle = svd_oracle(g)
    r = oracle.rank
    learned = np.asarray(report.values, dtype=float)
    n = max(r, len(learned))
    padded_o = np.pad(oracle.values, (0, n - r))
    padded_l = np.pad(learned, (0, n - len(learned)))
    fid_a, fid_b = [], []
    ref_b = oracle.right.conj()
    for group in _degenerate_groups(oracle.values, degeneracy_tol):
        for k in group:
            if k >= report.modes_a.shape[1] or k >= report.modes_b.shape[1]:
                continue
            if len(group) == 1:
                fid_a.append(mode_fidelity(report.modes_a[:, k], oracle.left[:, k]))
                fid_b.append(mode_fidelity(report.modes_b[:, k], ref_b[:, k]))
            else:
                fid_a.append(subspace_fidelity(report.modes_a[:, [k]], oracle.left[:, group]))
                fid_b.append(subspace_fidelity(report.modes_b[:, [k]], ref_b[:, group]))
    report.fidelities_a, report.fidelities_b = fid_a, fid_b
    entropy_oracle = entropy_of_measured(oracle.values)
    entropy_error = abs(report.entropy_bits - entropy_oracle)
    return {
        "values_oracle": [float(v) for v in oracle.values],
        "value_errors": [float(abs(a - b)) for a, b in zip(padded_l, padded_o)],
        "fidelities_a": fid_a,
        "fidelities_b": fid_b,
        "entropy_oracle": float(entropy_oracle),
        "entropy_error": float(entropy_error),
        "entropy_rel_error": float(entropy_error / entropy_oracle) if entropy_oracle > 0 else float(entropy_error),
    }


def _angle_delta(a, b) -> np.ndarray:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return np.abs(np.angle(np.exp(1j * d)))


def _mesh_phases(mesh: dict) -> np.ndarray:
    return np.array([[node["theta"], node["phi"]] for layer in mesh["layers"] for node in layer["nodes"]]).reshape(-1)


def _modes(d: dict) -> np.ndarray:
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


def compare_runs(run_a: dict, run_b: dict) -> dict:
    """Value deltas, trained-phase deltas and mode-fidelity cross tables of two run records."""
    ra, rb = run_a["report"], run_b["report"]
    ma_a, ma_b = _modes(ra["modes_a"]), _modes(rb["modes_a"])
    mb_a, mb_b = _modes(ra["modes_b"]), _modes(rb["modes_b"])
    if ma_a.shape != ma_b.shape or mb_a.shape != mb_b.shape:
        raise ValueError(f"incompatible dimensions: {ma_a.shape}/{mb_a.shape} vs {ma_b.shape}/{mb_b.shape}")
    va, vb = np.asarray(ra["values"]), np.asarray(rb["values"])
    value_deltas = np.abs(va - vb)
    out = {
        "value_deltas": value_deltas.tolist(),
        "max_value_delta": float(value_deltas.max(initial=0.0)),
        "fidelity_table_a": (np.abs(ma_a.conj().T @ ma_b) ** 2).tolist(),
        "fidelity_table_b": (np.abs(mb_a.conj().T @ mb_b) ** 2).tolist(),
    }
    if "mesh_a" in run_a and "mesh_a" in run_b:
        pa = np.concatenate([_mesh_phases(run_a["mesh_a"]), _mesh_phases(run_a["mesh_b"])])
        pb = np.concatenate([_mesh_phases(run_b["mesh_a"]), _mesh_phases(run_b["mesh_b"])])
        if pa.shape != pb.shape:
            raise ValueError("incompatible mesh layouts")
        out["max_phase_delta"] = float(_angle_delta(pa, pb).max(initial=0.0))
    return out


def compare_reports(report_a: dict, report_b: dict) -> dict:
    """Diff two run reports seed by seed."""
    runs_a = {r["seed"]: r for r in report_a.get("runs", [])}
    runs_b = {r["seed"]: r for r in report_b.get("runs", [])}
    common = sorted(set(runs_a) & set(runs_b))
    if not common:
        raise ValueError("reports share no seeds")
    per_seed = {}
    for seed in common:
        if "report" not in runs_a[seed] or "report" not in runs_b[seed]:
            continue
        per_seed[str(seed)] = compare_runs(runs_a[seed], runs_b[seed])
    if not per_seed:
        raise ValueError("reports contain no comparable trained runs")
    summary = {
        "seeds": [int(s) for s in per_seed],
        "max_value_delta": max(r["max_value_delta"] for r in per_seed.values()),
        "runs": per_seed,
    }
    phase = [r["max_phase_delta"] for r in per_seed.values() if "max_phase_delta" in r]
    if phase:
        summary["max_phase_delta"] = max(phase)
    return summary


# --- state CSV ------------------------------------------------------------------


def format_complex(z: complex) -> str:
    z = complex(z)
    return f"{z.real!r}{'-' if z.imag < 0 else '+'}{abs(z.imag)!r}j"


def state_to_csv(g: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(g, dtype=complex):
        writer.writerow([format_complex(z) for z in row])
    return buf.getvalue()


def state_from_csv(text: str, normalize: bool = True) -> StateMatrix | np.ndarray:
    """Rows are A-ports; entries like ``0.5+0.25j``."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError("empty state file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"ragged state file: row widths {sorted(widths)}")
    try:
        g = np.array([[complex(c.strip().replace(" ", "")) for c in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"bad complex entry in state file: {exc}") from exc
    return StateMatrix.normalized(g) if normalize else g


def load_state_csv(path: str | Path) -> StateMatrix:
    return state_from_csv(Path(path).read_text())


# --- SVG heatmaps -----------------------------------------------------------------


def heatmap_svg(values: np.ndarray, title: str = "", cell: int = 12) -> str:
    """Greyscale heatmap of a non-negative real matrix (black = max)."""
    v = np.abs(np.asarray(values, dtype=complex))
    n_rows, n_cols = v.shape
    top = 20 if title else 0
    peak = v.max() if v.size and v.max() > 0 else 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{n_cols * cell}" height="{n_rows * cell + top}">',
    ]
    if title:
        parts.append(f'<text x="2" y="14" font-family="monospace" font-size="12">{title}</text>')
    for j in range(n_rows):
        for k in range(n_cols):
            shade = int(round(255 * (1 - v[j, k] / peak)))
            parts.append(f'<rect x="{k * cell}" y="{top + j * cell}" width="{cell}" height="{cell}" '
                         f'fill="rgb({shade},{shade},{shade})"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def modes_to_csv(modes: np.ndarray, n_modes: int) -> str:
    """Mode profiles |y_k|^2 and phases, one row per input bin."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    n_modes = min(n_modes, modes.shape[1])
    header = ["bin"]
    for k in range(n_modes):
        header += [f"abs2_{k}", f"phase_{k}"]
    writer.writerow(header)
    for j in range(modes.shape[0]):
        row = [j]
        for k in range(n_modes):
            row += [repr(float(abs(modes[j, k]) ** 2)), repr(float(np.angle(modes[j, k])))]
        writer.writerow(row)
    return buf.getvalue()
