import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from schmidt_mesh.linalg import make_rng

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return make_rng(1234)


def assert_unitary(u, tol):
    u = np.asarray(u)
    assert np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) < tol


def oracle_configure(mesh_a, mesh_b, g):
    """Steer every layer to the oracle's Schmidt modes, as a fully trained pair would be."""
    from schmidt_mesh.linalg import svd_oracle
    from schmidt_mesh.mesh import partial_unitary, steer_layer_to_vector

    res = svd_oracle(g)
    targets = {"A": res.left, "B": res.right.conj()}
    for side, mesh in (("A", mesh_a), ("B", mesh_b)):
        for k, layer in enumerate(mesh.layers):
            if k >= res.rank:
                break
            v = partial_unitary(mesh, k) @ targets[side][:, k]
            layer.params = steer_layer_to_vector(layer, v[k:])
        mesh.trained_depth = len(mesh.layers)
    return res


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
