"""Acceptance criteria, one test each; every test prints a PASS/FAIL line with its measured margin."""
import time
from pathlib import Path

import numpy as np
import pytest

from schmidt_mesh import config as config_mod
from schmidt_mesh import protocols
from schmidt_mesh.cli import run
from schmidt_mesh.imperfections import LossModel, post_selected
from schmidt_mesh.linalg import make_rng, svd_oracle
from schmidt_mesh.mesh import MeshNetwork
from schmidt_mesh.sources import bell_state, degenerate_state, random_state
from schmidt_mesh.states import mode_fidelity, von_neumann_entropy
from schmidt_mesh.trainer import (
    CoincidenceObjective,
    Measurement,
    PowerObjective,
    TrainingSchedule,
    analytic_gradient,
    sequential_coincidence_training,
    sequential_power_training,
)
from conftest import ACCEPTANCE_LINES

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
METHODS = {"power": sequential_power_training, "coincidence": sequential_coincidence_training}


def verdict(n: int, name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d} {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def train(method, state, loss=None):
    n_a, n_b = state.shape
    m = Measurement(loss=loss or LossModel())
    return METHODS[method](MeshNetwork.build(n_a), MeshNetwork.build(n_b), state, TrainingSchedule(), m)


def fidelities(report, g):
    o = svd_oracle(g)
    return [mode_fidelity(report.modes_a[:, k], o.left[:, k]) for k in range(o.rank)] + [
        mode_fidelity(report.modes_b[:, k], o.right[:, k].conj()) for k in range(o.rank)]


def mesh_phases(result):
    return np.concatenate([layer.params for mesh in (result.mesh_a, result.mesh_b) for layer in mesh.layers])


def angle_gap(a, b):
    return float(np.max(np.abs(np.angle(np.exp(1j * (a - b))))))


def run_config(name, tmp_path, jobs=1, **override):
    cfg = config_mod.load(CONFIGS / f"{name}.toml")
    cfg.update(override)
    start = time.perf_counter()
    report, code = run(cfg, tmp_path / name, jobs)
    return report, code, time.perf_counter() - start


@pytest.fixture(scope="module")
def ginibre_runs():
    start = time.perf_counter()
    runs = []
    for seed in range(10):
        s = random_state(8, 8, make_rng(seed))
        runs.append((s, {m: train(m, s) for m in METHODS}))
    return runs, time.perf_counter() - start


def test_criterion_01_bell_baseline():
    start = time.perf_counter()
    report = train("coincidence", bell_state()).report
    dt = time.perf_counter() - start
    dv = float(np.max(np.abs(report.values - 1 / np.sqrt(2))))
    ds = abs(report.entropy_bits - 1.0)
    verdict(1, "Bell baseline", dv <= 1e-3 and ds <= 1e-3 and dt < 1.0,
            f"value dev {dv:.2e}, entropy dev {ds:.2e} (tol 1e-3), {dt:.2f} s (< 1 s)")


def test_criterion_02_random_fidelity(ginibre_runs):
    runs, dt = ginibre_runs
    worst_f, worst_v = 1.0, 0.0
    for s, results in runs:
        oracle = svd_oracle(s.g).values
        for r in results.values():
            worst_f = min(worst_f, min(fidelities(r.report, s.g)))
            worst_v = max(worst_v, float(np.max(np.abs(r.report.values - oracle))))
    verdict(2, "random 8x8 vs oracle", worst_f >= 0.999 and worst_v < 1e-4 and dt < 30,
            f"min fidelity {worst_f:.7f} (>= 0.999), max value error {worst_v:.2e} (< 1e-4), "
            f"{dt:.1f} s for 10 seeds x 2 methods (< 30 s)")


def test_criterion_03_method_agreement(ginibre_runs):
    runs, _ = ginibre_runs
    worst = max(float(np.max(np.abs(r["power"].report.values - r["coincidence"].report.values)))
                for _, r in runs)
    verdict(3, "method agreement", worst <= 1e-5, f"max |power - coincidence| {worst:.2e} (tol 1e-5)")


def test_criterion_04_spdc_entropy(tmp_path):
    errors, entropies, total = {}, {}, 0.0
    for preset in ("unfiltered", "filtered", "gvm"):
        report, _, dt = run_config(f"spdc_{preset}", tmp_path)
        total += dt
        rec = report["runs"][0]
        errors[preset] = rec["oracle"]["entropy_rel_error"]
        entropies[preset] = rec["report"]["entropy_bits"]
    ok = max(errors.values()) < 0.01 and entropies["filtered"] < entropies["unfiltered"] and total < 120
    detail = ", ".join(f"{k} S={entropies[k]:.4f} rel err {errors[k]:.2e}" for k in errors)
    verdict(4, "SPDC entropy", ok, f"{detail} (< 1%); filtered < unfiltered; {total:.1f} s (< 120 s)")


def test_criterion_05_gradient_check():
    rng = make_rng(55)
    worst = 0.0
    for point in range(50):
        n = 4 + point % 4
        s = random_state(n, n, rng)
        mesh_a, mesh_b = MeshNetwork.build(n), MeshNetwork.build(n)
        k = point % 3
        obj = [PowerObjective(mesh_a, s, "A", k), PowerObjective(mesh_b, s, "B", k),
               CoincidenceObjective(mesh_a, mesh_b, s, k)][point % 3]
        obj.set(rng.uniform(0, 2 * np.pi, obj.n_params))
        g = analytic_gradient(obj)
        p0, h = obj.get(), 1e-6
        fd = np.zeros_like(p0)
        for i in range(len(p0)):
            e = np.zeros_like(p0)
            e[i] = h
            obj.set(p0 + e)
            up = obj.value()
            obj.set(p0 - e)
            fd[i] = (up - obj.value()) / (2 * h)
        obj.set(p0)
        worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(g)))
    verdict(5, "gradient correctness", worst < 1e-6, f"max relative error {worst:.2e} over 50 points (< 1e-6)")


def test_criterion_06_scaling(tmp_path):
    report, _, dt = run_config("scaling", tmp_path)
    s = report["summary"]
    counts = ", ".join(f"N={n}: {c:g}" for n, c in zip(s["sizes"], s["median_measurements"]))
    verdict(6, "measurement scaling", s["exponent"] <= 1.25 and s["all_reached"] and dt < 300,
            f"median measurements {counts}; exponent {s['exponent']:.3f} (<= 1.25); {dt:.1f} s (< 300 s)")


def test_criterion_07_output_loss_invariance():
    s = random_state(6, 6, make_rng(7))
    loss = LossModel(output_a=np.linspace(0.3, 0.95, 6), output_b=np.linspace(0.9, 0.2, 6))
    dphase = dvalue = 0.0
    for method in METHODS:
        clean, lossy = train(method, s), train(method, s, loss)
        dphase = max(dphase, angle_gap(mesh_phases(clean), mesh_phases(lossy)))
        dvalue = max(dvalue, float(np.max(np.abs(clean.report.values - lossy.report.values))))
    verdict(7, "output-loss invariance", dphase <= 1e-6 and dvalue <= 1e-6,
            f"max phase delta {dphase:.2e}, max value delta {dvalue:.2e} (tol 1e-6), both methods")


def test_criterion_08_input_loss():
    s = random_state(6, 6, make_rng(8))
    skewed = LossModel(input_a=np.linspace(0.4, 1.0, 6), input_b=np.linspace(1.0, 0.5, 6))
    distorted = post_selected(s, skewed).g
    fid = min(fidelities(train("coincidence", s, skewed).report, distorted))
    clean = train("coincidence", s)
    uniform = train("coincidence", s, LossModel(input_a=0.6, input_b=0.8))
    dvalue = float(np.max(np.abs(clean.report.values - uniform.report.values)))
    dphase = angle_gap(mesh_phases(clean), mesh_phases(uniform))
    verdict(8, "input-loss distortion", fid >= 0.99 and dvalue <= 1e-6 and dphase <= 1e-6,
            f"non-uniform: min fidelity to distorted oracle {fid:.6f} (>= 0.99); "
            f"uniform vs lossless: value delta {dvalue:.2e}, phase delta {dphase:.2e} (tol 1e-6)")


def test_criterion_09_shot_noise(tmp_path):
    report, _, dt = run_config("noise_sweep", tmp_path, jobs=4)
    s = report["summary"]
    med = s["median_entropy_rel_error"]
    monotone = all(a > b for a, b in zip(med, med[1:]))
    table = ", ".join(f"{b:g}: {m:.2e}" for b, m in zip(s["budgets"], med))
    verdict(9, "shot noise", med[-1] < 0.05 and monotone,
            f"median entropy rel error by budget {table}; final < 5%, strictly decreasing; {dt:.1f} s")


def test_criterion_10_impurity(tmp_path, ginibre_runs):
    report, _, _ = run_config("mixed", tmp_path)
    mixed = report["runs"][0]["report"]["crosstalk"]
    runs, _ = ginibre_runs
    pure = max(r.report.crosstalk for _, results in runs for r in results.values())
    pure = max(pure, train("coincidence", bell_state()).report.crosstalk)
    verdict(10, "impurity detection", mixed > 0.01 and pure < 1e-6,
            f"mixed crosstalk {mixed:.3f} (> 0.01); max pure-state crosstalk {pure:.2e} over 21 runs (< 1e-6)")


def test_criterion_11_distribution(tmp_path, monkeypatch):
    seen = []
    real = protocols.sequential_coincidence_training

    def spy(mesh_a, mesh_b, state, *rest):
        seen.append(type(state).__name__)
        return real(mesh_a, mesh_b, state, *rest)

    monkeypatch.setattr(protocols, "sequential_coincidence_training", spy)
    report, _, _ = run_config("distribute", tmp_path)
    dist = [r["distribution"] for r in report["runs"]]
    diag = min(d["diagonal_sum"] for d in dist)
    dv = max(abs(v - 1 / np.sqrt(2)) for d in dist for v in d["values_learned"][:2])
    blind = len(seen) == len(report["runs"]) and set(seen) == {"StateMatrix"}
    verdict(11, "entanglement distribution", diag >= 0.999 and dv <= 1e-3 and blind,
            f"min sum C_kk {diag:.6f} (>= 0.999), value dev {dv:.2e} (tol 1e-3), "
            f"{len(report['runs'])} channel pairs, trainer saw only the received state")


def test_criterion_12_supermode():
    s = degenerate_state(4, make_rng(12))
    r = train("coincidence", s)
    outs = [protocols.generate_supermode_bell(r.mesh_a, r.mesh_b, s, phi) for phi in (0.0, np.pi)]
    ds = max(abs(von_neumann_entropy(svd_oracle(o.g).values) - 1.0) for o in outs)
    overlap = abs(np.vdot(outs[0].g, outs[1].g))
    verdict(12, "supermode Bell", ds <= 2e-3 and overlap <= 1e-10,
            f"entropy dev {ds:.2e} (tol 2e-3), |<phi=0|phi=pi>| {overlap:.2e} (tol 1e-10)")


def test_criterion_13_determinism(tmp_path):
    names = ["bell", "random_8x8", "random_8x8_power", "mixed", "distribute", "supermode", "noise_sweep"]
    same = []
    for name in names:
        texts = []
        for attempt, jobs in enumerate((1, 4)):
            run_config(name, tmp_path / str(attempt), jobs=jobs, seeds=[0])
            texts.append((tmp_path / str(attempt) / name / "report.json").read_bytes())
        same.append(texts[0] == texts[1])
    verdict(13, "determinism", all(same),
            f"report.json byte-identical across reruns (1 vs 4 workers) for {sum(same)}/{len(names)} configs")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
