import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from schmidt_mesh.linalg import make_rng, svd_oracle
from schmidt_mesh.mesh import MeshNetwork, network_unitary
from schmidt_mesh.sources import (
    SPDC_FILTERED,
    SPDC_GVM,
    SPDC_UNFILTERED,
    SpdcParams,
    bell_state,
    degenerate_state,
    embedded_bell_state,
    frequency_grid,
    random_state,
    schmidt_state,
    spdc_jsa,
)
from schmidt_mesh.states import crosstalk, entropy_of_measured, von_neumann_entropy

# oracle entropies (bits) of the three SPDC presets at 32 bins, pinned on first build
PINNED_ENTROPY = {"unfiltered": 3.290417894409578, "filtered": 0.3289994466326209, "gvm": 0.7507216716074757}
PRESETS = {"unfiltered": SPDC_UNFILTERED, "filtered": SPDC_FILTERED, "gvm": SPDC_GVM}


def test_random_1x1():
    s = random_state(1, 1, make_rng(0))
    assert abs(s.g[0, 0]) == pytest.approx(1.0)
    assert von_neumann_entropy(svd_oracle(s.g).values) == pytest.approx(0.0, abs=1e-15)


def test_random_reproducible_and_full_rank():
    a, b = random_state(8, 8, make_rng(42)), random_state(8, 8, make_rng(42))
    assert np.array_equal(a.g, b.g)
    assert svd_oracle(a.g).rank == 8


def test_random_rejects_empty():
    with pytest.raises(ValueError):
        random_state(0, 3, make_rng(0))


@given(st.integers(0, 2**32 - 1), st.integers(1, 7), st.integers(1, 7))
def test_generated_states_normalized(seed, n_a, n_b):
    assert np.linalg.norm(random_state(n_a, n_b, make_rng(seed)).g) == pytest.approx(1.0, abs=1e-12)


def test_spdc_separable_limit():
    s = spdc_jsa(SpdcParams(n_bins=16, sigma=1e12))
    res = svd_oracle(s.g)
    assert np.allclose(s.g, s.g[0, 0])
    assert res.rank == 1
    assert entropy_of_measured(res.values) == pytest.approx(0.0, abs=1e-12)


def test_spdc_unfiltered_anti_diagonal():
    g = np.abs(spdc_jsa(SPDC_UNFILTERED).g)
    n = g.shape[0]
    anti = np.array([g[j, n - 1 - j] for j in range(n)])
    assert anti.min() > 10 * g[0, 0]


@pytest.mark.parametrize("name", sorted(PINNED_ENTROPY))
def test_spdc_pinned_entropy(name):
    res = svd_oracle(spdc_jsa(PRESETS[name]).g)
    assert entropy_of_measured(res.values) == pytest.approx(PINNED_ENTROPY[name], rel=1e-9)


def test_filter_reduces_entanglement():
    assert PINNED_ENTROPY["filtered"] < PINNED_ENTROPY["unfiltered"]


def test_gvm_side_lobes():
    g = spdc_jsa(SPDC_GVM).g.real
    # sinc phase matching makes the amplitude change sign along the anti-correlation ridge
    assert g.min() < -1e-3 * g.max()


@pytest.mark.parametrize("params", [SPDC_UNFILTERED, SPDC_FILTERED, SpdcParams(gvm=(0.7, 0.7))])
def test_spdc_exchange_symmetry(params):
    g = spdc_jsa(params).g
    assert np.allclose(g, g.T, atol=1e-15)


def test_spdc_params_validation():
    with pytest.raises(ValueError):
        SpdcParams(n_bins=1)
    with pytest.raises(ValueError):
        SpdcParams(sigma=0)
    with pytest.raises(ValueError):
        SpdcParams(sigma_f=-1)
    assert SPDC_UNFILTERED.to_dict()["sigma_f"] is None
    assert np.array_equal(frequency_grid(3), [-1, 0, 1])


def test_degenerate_n2_is_bell():
    s = degenerate_state(2, make_rng(3), tail=0.0)
    assert von_neumann_entropy(svd_oracle(s.g).values) == pytest.approx(1.0, abs=1e-12)


def test_degenerate_n4():
    res = svd_oracle(degenerate_state(4, make_rng(3)).g)
    assert abs(res.values[0] - res.values[1]) < 1e-12
    with pytest.raises(ValueError):
        degenerate_state(1, make_rng(0))


def test_schmidt_state_values(rng):
    s = schmidt_state([0.8, 0.5, 0.3], 6, 5, rng)
    expected = np.array([0.8, 0.5, 0.3]) / np.linalg.norm([0.8, 0.5, 0.3])
    assert np.allclose(svd_oracle(s.g).values, expected, atol=1e-12)
    with pytest.raises(ValueError):
        schmidt_state([1, 1, 1], 2, 5, rng)


def test_bell_examples():
    s = bell_state()
    assert np.allclose(svd_oracle(s.g).values, [0.7071, 0.7071], atol=1e-4)
    assert von_neumann_entropy(svd_oracle(s.g).values) == pytest.approx(1.0)
    mesh = MeshNetwork.build(2)
    assert crosstalk(s, network_unitary(mesh), network_unitary(mesh)) == 0.0


def test_embedded_bell():
    s = embedded_bell_state(8)
    assert s.shape == (8, 8)
    assert np.allclose(svd_oracle(s.g).values, [math.sqrt(0.5)] * 2)
