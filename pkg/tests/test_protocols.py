import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from schmidt_mesh.linalg import haar_unitary, make_rng, svd_oracle
from schmidt_mesh.mesh import MeshNetwork
from schmidt_mesh.protocols import (
    ModeAbsentError,
    NotDegenerateError,
    ScatteringScenario,
    distribute_entanglement,
    generate_separable,
    generate_supermode_bell,
    read_schmidt_mode,
)
from schmidt_mesh.sources import bell_state, degenerate_state, embedded_bell_state, random_state, schmidt_state
from schmidt_mesh.states import (
    StateMatrix,
    mode_fidelity,
    von_neumann_entropy,
)
from schmidt_mesh.trainer import sequential_coincidence_training
from conftest import oracle_configure


def entropy(state):
    return von_neumann_entropy(svd_oracle(state.g).values)


def trained(state):
    n_a, n_b = state.shape
    return sequential_coincidence_training(MeshNetwork.build(n_a), MeshNetwork.build(n_b), state)


@pytest.mark.parametrize("k", range(4))
def test_read_identity_mesh(k):
    mesh = MeshNetwork.build(4)
    mesh.trained_depth = len(mesh.layers)
    assert np.allclose(read_schmidt_mode(mesh, k), np.eye(4)[k])


def test_read_oracle_configured(rng):
    s = random_state(5, 4, rng)
    mesh_a, mesh_b = MeshNetwork.build(5), MeshNetwork.build(4)
    res = oracle_configure(mesh_a, mesh_b, s.g)
    for k in range(4):
        assert mode_fidelity(read_schmidt_mode(mesh_a, k), res.left[:, k]) == pytest.approx(1, abs=1e-10)
        assert mode_fidelity(read_schmidt_mode(mesh_b, k), res.right[:, k].conj()) == pytest.approx(1, abs=1e-10)


def test_read_untrained_layer_fails():
    mesh = MeshNetwork.build(4)
    mesh.trained_depth = 1
    read_schmidt_mode(mesh, 0)
    with pytest.raises(ValueError, match="not fixed"):
        read_schmidt_mode(mesh, 1)


def test_separable_bell():
    r = trained(bell_state())
    out = generate_separable(r.mesh_a, r.mesh_b, bell_state(), 0)
    assert entropy(out) < 1e-6


def test_separable_identity_diag():
    s = StateMatrix.normalized(np.diag([0.8, 0.5, 0.3]))
    out = generate_separable(MeshNetwork.build(3), MeshNetwork.build(3), s, 0)
    expected = np.zeros((3, 3))
    expected[0, 0] = 1
    assert np.allclose(np.abs(out.g), expected, atol=1e-12)


def test_separable_random_mode_pair(rng):
    s = random_state(6, 6, rng)
    res = svd_oracle(s.g)
    r = trained(s)
    out = generate_separable(r.mesh_a, r.mesh_b, s, 1)
    out_svd = svd_oracle(out.g)
    assert out_svd.rank == 1
    assert mode_fidelity(out_svd.left[:, 0], res.left[:, 1]) >= 0.999
    assert mode_fidelity(out_svd.right[:, 0], res.right[:, 1]) >= 0.999
    assert entropy(out) < 1e-6


def test_separable_mode_absent(rng):
    s = schmidt_state([1.0], 4, 4, rng)
    r = trained(s)
    with pytest.raises(ModeAbsentError, match="mode absent"):
        generate_separable(r.mesh_a, r.mesh_b, s, 2)


@pytest.fixture(scope="module")
def degenerate_pair():
    s = degenerate_state(4, make_rng(11))
    return s, trained(s)


def test_supermode_orthogonal_and_maximally_entangled(degenerate_pair):
    s, r = degenerate_pair
    out0 = generate_supermode_bell(r.mesh_a, r.mesh_b, s, 0.0)
    out1 = generate_supermode_bell(r.mesh_a, r.mesh_b, s, np.pi)
    assert abs(np.vdot(out0.g, out1.g)) < 1e-10
    for out in (out0, out1):
        assert entropy(out) == pytest.approx(1.0, abs=1e-3)
        c = np.abs(out.g) ** 2
        assert c[0, 0] == pytest.approx(0.5, abs=2e-3)
        assert c[1, 1] == pytest.approx(0.5, abs=2e-3)


@given(st.floats(-np.pi, np.pi))
def test_supermode_phase_is_set(phi):
    s = StateMatrix.normalized(np.eye(2))
    m = MeshNetwork.build(2)
    out = generate_supermode_bell(m, m, s, phi)
    assert np.angle(np.exp(1j * (np.angle(out.g[1, 1]) - np.angle(out.g[0, 0]) - phi))) == pytest.approx(0, abs=1e-9)


def test_supermode_rejects_non_degenerate():
    s = StateMatrix.normalized(np.diag([0.9, 0.4]))
    m = MeshNetwork.build(2)
    with pytest.raises(NotDegenerateError, match="lambda_1/lambda_2 = 2.25"):
        generate_supermode_bell(m, m, s, 0.0)


def test_channels_must_be_unitary():
    with pytest.raises(ValueError, match="unitary"):
        ScatteringScenario(bell_state(), np.eye(2) * 1.01, np.eye(2))
    with pytest.raises(ValueError, match="shape"):
        ScatteringScenario(bell_state(), np.eye(3), np.eye(2))


@given(st.integers(0, 2**32 - 1))
def test_channel_invariance_of_values(seed):
    rng = make_rng(seed)
    s = random_state(5, 4, rng)
    sc = ScatteringScenario(s, haar_unitary(5, rng), haar_unitary(4, rng))
    assert np.allclose(svd_oracle(sc.received.g).values, svd_oracle(s.g).values, atol=1e-10)


def test_distribute_identity_channels():
    rep = distribute_entanglement(ScatteringScenario(bell_state(), np.eye(2), np.eye(2)))
    assert np.allclose(np.diag(rep.training.coincidences), 0.5, atol=1e-6)


@pytest.mark.parametrize("seeds", [(1, 2), (7, 8)])
def test_distribute_bell_through_haar(seeds):
    sc = ScatteringScenario.haar(embedded_bell_state(8), *seeds)
    rep = distribute_entanglement(sc, source_name="bell")
    assert rep.diagonal_sum >= 0.999
    assert rep.crosstalk < 1e-3
    assert np.allclose(rep.values_learned[:2], 1 / np.sqrt(2), atol=1e-3)
    d = rep.to_dict()
    assert set(d) == {"source", "channel_seeds", "values_learned", "values_oracle", "crosstalk",
                      "diagonal_sum", "measurements_used"}
    assert d["channel_seeds"] == list(seeds)


def test_distribute_rank_three(rng):
    src = schmidt_state([0.8, 0.5, 0.3], 6, 6, rng)
    rep = distribute_entanglement(ScatteringScenario.haar(src, 3, 4))
    assert np.max(np.abs(rep.values_learned[:3] - rep.values_oracle[:3])) < 1e-4
