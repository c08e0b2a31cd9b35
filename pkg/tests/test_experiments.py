import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbdist.errors import ConfigError
from nbdist.experiments import (
    distance_matrix,
    knn_classify,
    pca_project,
    polyline_is_simple,
    principal_axes,
    size_sensitivity,
    size_sensitivity_reports,
    stratified_folds,
    synthetic_dataset,
    ws_manifold,
)
from nbdist.graph_core import ModelSpec, complete_graph, derive_seed, generate
from nbdist.spectral_distance import DistanceMatrix, embed, spectral_cdf


def block_matrix(sizes):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    values = (labels[:, None] != labels[None, :]).astype(float)
    return values, labels.tolist()


# -- kNN ---------------------------------------------------------------------


def test_perfectly_separated_classes():
    values, labels = block_matrix([12, 15])
    report = knn_classify(values, labels, k_neighbors=3, folds=4, seed=0)
    for m in (report.test, report.train):
        assert (m.accuracy, m.precision, m.recall) == (1.0, 1.0, 1.0)
    assert len(report.folds) == 4
    for f in report.folds:
        assert f.test_confusion.trace() == f.test_confusion.sum()


def test_chance_level_on_permuted_labels():
    rng = np.random.default_rng(7)
    pts = rng.random((60, 3))
    values = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    labels = np.array([0] * 30 + [1] * 30)
    accs = []
    for seed in range(20):
        perm = np.random.default_rng(seed).permutation(labels)
        accs.append(knn_classify(values, perm.tolist(), k_neighbors=10, folds=10, seed=seed).test.accuracy)
    assert abs(np.mean(accs) - 0.5) <= 0.2


def test_report_is_deterministic():
    rng = np.random.default_rng(3)
    pts = rng.random((40, 2))
    values = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    labels = ["a" if p[0] + 0.3 * rng.random() > 0.6 else "b" for p in pts]
    a = knn_classify(values, labels, k_neighbors=5, folds=5, seed=1)
    b = knn_classify(values, labels, k_neighbors=5, folds=5, seed=1)
    assert a.to_csv("x") == b.to_csv("x")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_joint_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    pts = rng.random((36, 3))
    values = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    labels = rng.permutation([0] * 12 + [1] * 12 + [2] * 12)
    perm = rng.permutation(36)
    a = knn_classify(values, labels.tolist(), k_neighbors=4, folds=3, seed=5)
    b = knn_classify(values[np.ix_(perm, perm)], labels[perm].tolist(), k_neighbors=4, folds=3, seed=5)
    assert a.to_csv() == b.to_csv()


def test_class_names_do_not_matter():
    rng = np.random.default_rng(11)
    pts = rng.random((30, 2))
    values = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    labels = [0] * 15 + [1] * 15
    a = knn_classify(values, labels, k_neighbors=3, folds=3, seed=2)
    b = knn_classify(values, ["x" if y == 0 else "y" for y in labels], k_neighbors=3, folds=3, seed=2)
    assert a.to_csv() == b.to_csv()


def test_metrics_stay_in_unit_interval():
    rng = np.random.default_rng(2)
    values = rng.random((30, 30))
    values = values + values.T
    np.fill_diagonal(values, 0)
    report = knn_classify(values, [0] * 10 + [1] * 10 + [2] * 10, k_neighbors=4, folds=5, seed=0)
    for f in report.folds:
        for m in (f.train, f.test):
            assert 0 <= m.accuracy <= 1 and 0 <= m.precision <= 1 and 0 <= m.recall <= 1
        assert f.test.accuracy == f.test_confusion.trace() / f.test_confusion.sum()


def test_too_few_class_members():
    values, labels = block_matrix([12, 3])
    with pytest.raises(ConfigError, match="at least 4"):
        knn_classify(values, labels, folds=4)


def test_single_class_rejected():
    with pytest.raises(ConfigError):
        knn_classify(np.zeros((10, 10)), [0] * 10, folds=2)


def test_stratified_folds_balance():
    labels = [0] * 20 + [1] * 13
    assignment = stratified_folds(labels, 5, seed=0)
    for c in (0, 1):
        counts = np.bincount(assignment[np.array(labels) == c], minlength=5)
        assert counts.max() - counts.min() <= 1
    assert np.array_equal(assignment, stratified_folds(labels, 5, seed=0))


def test_knn_accepts_distance_matrix():
    values, labels = block_matrix([5, 5])
    dm = DistanceMatrix(tuple(map(str, range(10))), values)
    assert knn_classify(dm, labels, k_neighbors=2, folds=5).test.accuracy == 1.0


def test_csv_has_mean_rows():
    values, labels = block_matrix([6, 6])
    text = knn_classify(values, labels, k_neighbors=2, folds=3).to_csv("dnbd")
    lines = text.splitlines()
    assert lines[0] == "method,split,fold,recall,precision,accuracy"
    assert lines[-1].startswith("dnbd,test,mean,")


# -- PCA ---------------------------------------------------------------------


def test_pca_identical_vectors():
    out = pca_project(np.ones((5, 4)), 3)
    assert out.shape == (5, 3) and not out.any()


def test_pca_single_point():
    assert not pca_project(np.arange(6.0)[None], 3).any()


def test_pca_line():
    x = np.arange(6.0)
    pts = np.stack([x, 2 * x], axis=1)
    axes, var = principal_axes(pts, 2)
    np.testing.assert_allclose(axes[:, 0], [1 / math.sqrt(5), 2 / math.sqrt(5)], atol=1e-12)
    assert np.all(axes[:, 1] == 0)
    assert var[1] == 0
    proj = pca_project(pts, 2)
    assert np.all(proj[:, 1] == 0)
    np.testing.assert_allclose(np.abs(proj[:, 0]), np.abs(x - x.mean()) * math.sqrt(5), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 15), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_pca_full_rank_preserves_distances(count, width, seed):
    pts = np.random.default_rng(seed).normal(size=(count, width))
    axes, _ = principal_axes(pts, width)
    nz = np.flatnonzero(np.abs(axes).sum(axis=0) > 0)
    gram = axes[:, nz].T @ axes[:, nz]
    np.testing.assert_allclose(gram, np.eye(nz.size), atol=1e-10)
    proj = pca_project(pts, width)
    d_in = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    d_out = np.linalg.norm(proj[:, None] - proj[None], axis=-1)
    np.testing.assert_allclose(d_out, d_in, atol=1e-9)


def test_pca_wide_matches_covariance_route():
    rng = np.random.default_rng(4)
    wide = rng.normal(size=(6, 40))
    axes_wide, var_wide = principal_axes(wide, 3)
    cov = np.cov(wide.T)
    w, v = np.linalg.eigh(cov)
    np.testing.assert_allclose(var_wide, w[::-1][:3], rtol=1e-9)
    for j in range(3):
        assert abs(abs(axes_wide[:, j] @ v[:, -1 - j]) - 1) <= 1e-9
        assert axes_wide[np.flatnonzero(np.abs(axes_wide[:, j]) > 1e-12)[0], j] > 0


def test_pca_dims_too_large():
    with pytest.raises(ConfigError):
        pca_project(np.ones((3, 2)), 3)


# -- polylines ---------------------------------------------------------------


def test_polyline_simple_cases():
    assert polyline_is_simple([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 1]])
    # crossing square diagonals
    assert not polyline_is_simple([[0, 0, 0], [1, 1, 0], [1, 0, 0], [0, 1, 0]])
    # repeated vertex
    assert not polyline_is_simple([[0, 0, 0], [0, 0, 0], [1, 0, 0]])
    # folds back onto itself
    assert not polyline_is_simple([[0, 0, 0], [2, 0, 0], [1, 0, 0]])
    assert polyline_is_simple([[0, 0, 0], [1, 0, 0]])


# -- WS manifold -------------------------------------------------------------


def test_manifold_single_cell():
    man = ws_manifold(20, [0.1], [4], samples=1, embed_k=5, seed=0)
    assert man.projected.shape == (1, 3) and not man.projected.any()


def test_manifold_complete_graph_cells_coincide():
    man = ws_manifold(30, [0.0, 1.0], [4, 29], samples=1, embed_k=10, seed=3)
    full = [i for i, (_, k) in enumerate(man.cells) if k == 29]
    assert np.max(np.abs(man.mean_embeddings[full[0]] - man.mean_embeddings[full[1]])) <= 1e-9
    assert np.max(np.abs(man.projected[full[0]] - man.projected[full[1]])) <= 1e-9
    expected = embed(spectral_cdf(complete_graph(30)), 10)
    np.testing.assert_array_equal(man.mean_embeddings[full[0]], expected)


def test_manifold_embedding_dimension():
    man = ws_manifold(20, [0.0, 0.5], [4], samples=1, embed_k=100, seed=0)
    assert man.mean_embeddings.shape == (2, 10000)
    assert len(man.curve(0.5)) == 1
    assert man.to_csv().splitlines()[0] == "p,k,pc1,pc2,pc3"


def test_manifold_threads_match_serial():
    a = ws_manifold(25, [0.0, 0.3], [4, 6], samples=2, embed_k=8, seed=1, threads=1)
    b = ws_manifold(25, [0.0, 0.3], [4, 6], samples=2, embed_k=8, seed=1, threads=3)
    assert np.array_equal(a.projected, b.projected)


# -- size sensitivity --------------------------------------------------------


def test_reference_compared_to_itself():
    spec = ModelSpec("er", 100, p=0.1)
    rep = size_sensitivity(spec, [100], 1, "dnbd", seed=4, reference_seed=derive_seed(4, 100, 0))
    assert rep.raw_mean[0] == 0.0
    assert rep.scale == 0.0


def test_size_sensitivity_rescales_to_one_at_largest_n():
    spec = ModelSpec("er", 100, p=0.2)
    reports = size_sensitivity_reports(spec, [60, 120], 3, ["dnbd", "nbd", "laplacian"], seed=2, trunc_k=20)
    for rep in reports.values():
        assert rep.mean[-1] == pytest.approx(1.0)
        assert rep.n_values == [60, 120]
    assert reports["nbd"].trunc_k == 20
    csv_text = reports["dnbd"].to_csv()
    assert csv_text.splitlines()[0] == "family,method,n,mean,std,raw_mean,raw_std,scale"
    again = size_sensitivity_reports(spec, [60, 120], 3, ["dnbd"], seed=2)
    assert again["dnbd"].to_csv() == csv_text


def test_size_sensitivity_rejects_bad_input():
    spec = ModelSpec("er", 100, p=0.2)
    with pytest.raises(ConfigError):
        size_sensitivity(spec, [100], 0)
    with pytest.raises(ConfigError):
        size_sensitivity(spec, [100], 1, "bogus")


# -- datasets and distance matrices ------------------------------------------


def test_synthetic_dataset_sizes_and_labels():
    fams = [{"label": "ER", "family": "er", "count": 4, "p": 0.1}, {"label": "BA", "family": "ba", "count": 3, "m_attach": 2}]
    ds = synthetic_dataset(fams, seed=1)
    assert ds.labels == ["ER"] * 4 + ["BA"] * 3
    assert all(g.n >= 50 for g in ds.graphs)
    assert all(abs(g.n - 200) <= 40 for g in ds.graphs)
    assert [g.edges for g in synthetic_dataset(fams, seed=1).graphs] == [g.edges for g in ds.graphs]


@pytest.mark.parametrize("method", ["dnbd", "nbd", "laplacian"])
def test_distance_matrix_methods(method):
    graphs = [generate(ModelSpec("er", 30, p=0.2, seed=s)) for s in range(4)]
    dm = distance_matrix(graphs, method)
    assert dm.values.shape == (4, 4)
    assert np.array_equal(dm.values, dm.values.T)
    assert np.all(np.diag(dm.values) == 0) and np.all(dm.values >= 0)


def test_distance_matrix_unknown_method():
    with pytest.raises(ConfigError):
        distance_matrix([complete_graph(4)], "other")
