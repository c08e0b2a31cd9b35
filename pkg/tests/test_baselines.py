import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbdist.baselines import (
    core_spectrum,
    laplacian_distance,
    laplacian_spectrum,
    nbd_distance,
    nbd_embedding,
    nbd_embedding_distance,
    sorted_eigenvalues,
)
from nbdist.errors import ConfigError
from nbdist.experiments import size_sensitivity_reports
from nbdist.graph_core import Graph, ModelSpec, complete_graph, cycle_graph, path_graph, relabel
from nbdist.nb_spectrum import ComplexSpectrum, nb_spectrum

from conftest import random_simple_graph


def test_k4_top_eigenvalue(k4):
    emb = nbd_embedding(nb_spectrum(k4), 1)
    np.testing.assert_allclose(emb.alphas, [2.0], atol=1e-9)
    np.testing.assert_allclose(emb.betas, [0.0], atol=1e-9)


def test_triangle_tie_break_prefers_real(triangle):
    emb = nbd_embedding(nb_spectrum(triangle), 2)
    np.testing.assert_allclose(emb.alphas, [1.0, 1.0], atol=1e-9)
    np.testing.assert_allclose(emb.betas, [0.0, 0.0], atol=1e-9)


def test_zero_truncation_is_empty(k4):
    emb = nbd_embedding(nb_spectrum(k4), 0)
    assert emb.vector.size == 0


def test_truncation_too_large_names_sizes(k4):
    with pytest.raises(ConfigError, match="9.*8"):
        nbd_embedding(nb_spectrum(k4), 9)


def test_sort_order_is_lexicographic_descending():
    ev = np.array([1j, -1, 1, -1j, 0.5, 2j])
    out = sorted_eigenvalues(ComplexSpectrum(ev, 6, 2.0))
    np.testing.assert_array_equal(out, [2j, 1, 1j, -1j, -1, 0.5])


def test_nbd_distance_examples(triangle, k4):
    assert nbd_distance(triangle, k4, 1) == pytest.approx(1.0, abs=1e-9)
    assert nbd_distance(k4, k4, 8) == 0.0
    with pytest.raises(ConfigError, match="min"):
        nbd_distance(triangle, k4, 7)


def test_nbd_distance_on_trees_needs_zero_k():
    assert nbd_distance(path_graph(4), path_graph(7), 0) == 0.0
    with pytest.raises(ConfigError):
        nbd_distance(path_graph(4), cycle_graph(3), 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 30), st.floats(0.2, 0.6), st.integers(0, 2**32 - 1), st.randoms(use_true_random=False))
def test_nbd_relabel_invariance(n, p, seed, rnd):
    g = random_simple_graph(np.random.default_rng(seed), n, p)
    perm = list(range(n))
    rnd.shuffle(perm)
    h = relabel(g, perm)
    size = len(core_spectrum(g))
    for k in {0, min(1, size), size // 2, size}:
        assert nbd_distance(g, h, k) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nbd_symmetric_nonnegative(seed):
    rng = np.random.default_rng(seed)
    g1 = random_simple_graph(rng, int(rng.integers(4, 20)), 0.5)
    g2 = random_simple_graph(rng, int(rng.integers(4, 20)), 0.5)
    s1, s2 = core_spectrum(g1), core_spectrum(g2)
    k = min(len(s1), len(s2))
    d = nbd_embedding_distance(s1, s2, k)
    assert d >= 0 and d == nbd_embedding_distance(s2, s1, k)


# -- Laplacian ---------------------------------------------------------------


def test_laplacian_examples(k4):
    np.testing.assert_allclose(laplacian_spectrum(k4), [4, 4, 4, 0], atol=1e-12)
    np.testing.assert_array_equal(laplacian_spectrum(Graph.from_edges(3, [])), [0, 0, 0])
    np.testing.assert_allclose(laplacian_spectrum(path_graph(2)), [2, 0], atol=1e-12)


def test_laplacian_distance_k4_minus_edge(k4):
    k4e = Graph.from_edges(4, [e for e in k4.edges if e != (0, 1)])
    assert laplacian_distance(k4, k4e, 1) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigError):
        laplacian_distance(k4, path_graph(3), 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1), st.randoms(use_true_random=False))
def test_laplacian_properties(n, p, seed, rnd):
    g = random_simple_graph(np.random.default_rng(seed), n, p)
    spec = laplacian_spectrum(g)
    assert spec.min() >= -1e-9
    assert abs(spec[-1]) <= 1e-9
    assert np.all(np.diff(spec) <= 0)
    perm = list(range(n))
    rnd.shuffle(perm)
    assert laplacian_distance(g, relabel(g, perm), n) <= 1e-9


def test_complete_graph_laplacian():
    spec = laplacian_spectrum(complete_graph(7))
    np.testing.assert_allclose(spec, [7] * 6 + [0], atol=1e-10)


# -- growth of the truncated distance with size -------------------------------


def _growth(spec):
    return size_sensitivity_reports(spec, [100, 200, 400], 20, ["nbd"], seed=1, trunc_k=99)["nbd"].raw_mean


@pytest.mark.slow
def test_nbd_grows_with_size_er():
    mean = _growth(ModelSpec("er", 100, p=0.25))
    assert np.all(np.diff(mean) >= 0)


@pytest.mark.slow
def test_nbd_grows_with_size_ws():
    mean = _growth(ModelSpec("ws", 100, k=4, p=0.1))
    assert np.all(np.diff(mean) >= 0)


@pytest.mark.slow
def test_nbd_flat_for_random_regular():
    mean = _growth(ModelSpec("rr", 100, d=5))
    assert np.all(np.abs(mean / mean[0] - 1) <= 0.2)
