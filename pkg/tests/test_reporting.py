import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from schmidt_mesh.linalg import make_rng, svd_oracle
from schmidt_mesh.mesh import MeshNetwork
from schmidt_mesh.reporting import (
    _degenerate_groups,
    compare_reports,
    compare_runs,
    format_complex,
    heatmap_svg,
    modes_to_csv,
    oracle_comparison,
    state_from_csv,
    state_to_csv,
)
from schmidt_mesh.sources import degenerate_state, random_state
from schmidt_mesh.trainer import sequential_coincidence_training

finite = st.floats(-1e3, 1e3, allow_nan=False)


def run_record(state, seed=0):
    n_a, n_b = state.shape
    r = sequential_coincidence_training(MeshNetwork.build(n_a), MeshNetwork.build(n_b), state)
    return {"seed": seed, "report": r.report.to_dict(), "mesh_a": r.mesh_a.to_dict(), "mesh_b": r.mesh_b.to_dict()}


@given(finite, finite)
def test_complex_text_round_trip(re, im):
    z = complex(re, im)
    assert complex(format_complex(z)) == z


def test_state_csv_round_trip(rng):
    g = random_state(3, 5, rng).g
    assert np.array_equal(state_from_csv(state_to_csv(g), normalize=False), g)
    assert state_from_csv(state_to_csv(g)).shape == (3, 5)


@pytest.mark.parametrize("text,msg", [("", "empty"), ("1+0j,2\n3\n", "ragged"), ("1+0j,abc\n", "bad complex")])
def test_state_csv_errors(text, msg):
    with pytest.raises(ValueError, match=msg):
        state_from_csv(text)


def test_state_csv_accepts_spaced_entries():
    s = state_from_csv("0.6 + 0j, 0\n0, 0 - 0.8j\n")
    assert np.allclose(s.g, [[0.6, 0], [0, -0.8j]])


def test_heatmap_is_valid_svg():
    svg = heatmap_svg(np.array([[1.0, 0.5], [0.0, 0.25]]), "title")
    root = ET.fromstring(svg)
    rects = [e for e in root.iter() if e.tag.endswith("rect")]
    assert len(rects) == 4
    assert rects[0].get("fill") == "rgb(0,0,0)"
    assert rects[2].get("fill") == "rgb(255,255,255)"


def test_heatmap_zero_matrix():
    ET.fromstring(heatmap_svg(np.zeros((2, 3))))


def test_modes_csv_layout(rng):
    modes = svd_oracle(random_state(5, 5, rng).g).left
    lines = modes_to_csv(modes, 4).splitlines()
    assert lines[0] == "bin,abs2_0,phase_0,abs2_1,phase_1,abs2_2,phase_2,abs2_3,phase_3"
    assert len(lines) == 6
    col = np.array([float(l.split(",")[1]) for l in lines[1:]])
    assert col.sum() == pytest.approx(1.0)


def test_degenerate_groups():
    assert _degenerate_groups(np.array([0.6, 0.6, 0.4, 0.0]), 1e-6) == [[0, 1], [2], [3]]


def test_oracle_comparison_random(rng):
    s = random_state(4, 4, rng)
    rec = sequential_coincidence_training(MeshNetwork.build(4), MeshNetwork.build(4), s)
    block = oracle_comparison(rec.report, s.g)
    assert min(block["fidelities_a"] + block["fidelities_b"]) >= 0.999
    assert max(block["value_errors"]) < 1e-4
    assert block["entropy_rel_error"] < 1e-4
    assert rec.report.fidelities_a == block["fidelities_a"]


def test_oracle_comparison_degenerate_uses_span():
    s = degenerate_state(4, make_rng(5))
    rec = sequential_coincidence_training(MeshNetwork.build(4), MeshNetwork.build(4), s)
    block = oracle_comparison(rec.report, s.g)
    assert min(block["fidelities_a"][:2]) >= 0.999


def test_compare_identical_runs(rng):
    rec = run_record(random_state(3, 3, rng))
    diff = compare_runs(rec, rec)
    assert diff["max_value_delta"] == 0
    assert diff["max_phase_delta"] == 0
    assert np.allclose(np.diag(diff["fidelity_table_a"]), 1)


def test_compare_incompatible(rng):
    a = run_record(random_state(3, 3, rng))
    b = run_record(random_state(4, 4, rng))
    with pytest.raises(ValueError, match="incompatible dimensions"):
        compare_runs(a, b)


def test_compare_reports_needs_shared_seeds(rng):
    rec = run_record(random_state(3, 3, rng))
    other = dict(rec, seed=9)
    with pytest.raises(ValueError, match="no seeds"):
        compare_reports({"runs": [rec]}, {"runs": [other]})
    assert compare_reports({"runs": [rec]}, {"runs": [rec]})["seeds"] == [0]
