"""Synthetic-graph experiments: size sensitivity, the Watts-Strogatz manifold
and k-nearest-neighbour classification over distance matrices."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .baselines import core_spectrum, laplacian_spectrum, nbd_embedding, nbd_embedding_distance, truncated_distance
from .errors import ConfigError
from .graph_core import Graph, ModelSpec, derive_seed, generate, sample_size
from .spectral_distance import (
    DEFAULT_RESOLUTION,
    DistanceMatrix,
    _map,
    cdf_distance_matrix,
    compute_cdfs,
    dnbd,
    embed,
    spectral_cdf,
)

log = logging.getLogger(__name__)

METHODS = ("dnbd", "nbd", "laplacian")
REFERENCE_N = 100

TABLE1_FAMILIES = (
    {"label": "ER", "family": "er", "count": 30, "p": 0.1},
    {"label": "WS", "family": "ws", "count": 30, "k": 20, "p": 0.1},
    {"label": "BA", "family": "ba", "count": 30, "m_attach": 2},
)


# --------------------------------------------------------------------------
# Per-method features and distances


def _features(graphs: Sequence[Graph], method: str, labels: Sequence[str], threads: int):
    if method == "dnbd":
        return compute_cdfs(graphs, labels, threads)
    if method == "nbd":
        return _map(core_spectrum, list(graphs), threads)
    if method == "laplacian":
        return _map(laplacian_spectrum, list(graphs), threads)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


def _max_truncation(features) -> int:
    return min(len(f) for f in features)


def _feature_distance(a, b, method: str, resolution: int, trunc_k: int) -> float:
    if method == "dnbd":
        return dnbd(a, b, resolution)
    if method == "nbd":
        return nbd_embedding_distance(a, b, trunc_k)
    return truncated_distance(a, b, trunc_k)


def distance_matrix(graphs: Sequence[Graph], method: str = "dnbd", *,
                    resolution: int = DEFAULT_RESOLUTION, trunc_k: int | None = None,
                    labels: Sequence[str] | None = None, threads: int = 1) -> DistanceMatrix:
    """Pairwise distances under any of the three methods.

    For the truncated methods ``trunc_k`` defaults to the largest value every
    graph supports (smallest spectrum in the collection).
    """
    if labels is None:
        labels = [str(i) for i in range(len(graphs))]
    feats = _features(graphs, method, labels, threads)
    if method == "dnbd":
        return DistanceMatrix(tuple(labels), cdf_distance_matrix(feats, resolution, threads))
    if trunc_k is None:
        trunc_k = _max_truncation(feats)
        log.info("%s truncation defaulted to k=%d", method, trunc_k)
    smallest = sorted(range(len(feats)), key=lambda i: len(feats[i]))[:2]
    if len(smallest) == 2:
        # raises the size error for the tightest pair
        _feature_distance(feats[smallest[0]], feats[smallest[1]], method, resolution, trunc_k)
    if method == "nbd":
        vecs = np.array([nbd_embedding(f, trunc_k).vector for f in feats])
    else:
        vecs = np.array([f[:trunc_k] for f in feats])
    values = squareform(pdist(vecs)) if len(feats) > 1 else np.zeros((len(feats), len(feats)))
    return DistanceMatrix(tuple(labels), values)


# --------------------------------------------------------------------------
# Size sensitivity


@dataclass
class SizeSensitivityReport:
    family: str
    params: dict
    method: str
    n_values: list[int]
    mean: np.ndarray
    std: np.ndarray
    raw_mean: np.ndarray
    raw_std: np.ndarray
    scale: float
    reference_n: int = REFERENCE_N
    trunc_k: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["family", "method", "n", "mean", "std", "raw_mean", "raw_std", "scale"])
        for i, n in enumerate(self.n_values):
            w.writerow([self.family, self.method, n, repr(float(self.mean[i])), repr(float(self.std[i])),
                        repr(float(self.raw_mean[i])), repr(float(self.raw_std[i])), repr(float(self.scale))])
        return buf.getvalue()


def size_sensitivity_reports(model: ModelSpec, n_list: Sequence[int], samples: int,
                             methods: Sequence[str] = ("dnbd",), seed: int = 0, *,
                             resolution: int = DEFAULT_RESOLUTION, trunc_k: int | None = None,
                             reference_n: int = REFERENCE_N, reference_seed: int | None = None,
                             threads: int = 1) -> dict[str, SizeSensitivityReport]:
    """Distances from one reference graph to ``samples`` graphs per size.

    All requested methods share the same graphs. Means are divided by the
    mean at the largest size, so that entry is 1 unless it is zero.
    """
    if samples < 1:
        raise ConfigError("samples must be at least 1")
    if not n_list:
        raise ConfigError("n_list must be non-empty")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
    n_list = [int(n) for n in n_list]
    if reference_seed is None:
        reference_seed = derive_seed(seed, 0xFEED)
    reference = generate(model.with_n(reference_n, reference_seed))
    graphs = [reference]
    index = []
    for n in n_list:
        for i in range(samples):
            index.append(n)
            graphs.append(generate(model.with_n(n, derive_seed(seed, n, i))))

    reports = {}
    labels = [str(i) for i in range(len(graphs))]
    for method in methods:
        feats = _features(graphs, method, labels, threads)
        k = trunc_k
        if method != "dnbd" and k is None:
            k = _max_truncation(feats)
        dists = np.array([_feature_distance(feats[0], f, method, resolution, k) for f in feats[1:]])
        raw_mean, raw_std = [], []
        for n in n_list:
            sel = dists[[j for j, nn in enumerate(index) if nn == n]]
            raw_mean.append(sel.mean())
            raw_std.append(sel.std())
        raw_mean, raw_std = np.array(raw_mean), np.array(raw_std)
        scale = float(raw_mean[int(np.argmax(n_list))])
        div = scale if scale > 0 else 1.0
        params = {key: v for key, v in model.to_dict().items() if key not in ("n", "seed")}
        reports[method] = SizeSensitivityReport(
            model.family, params, method, n_list, raw_mean / div, raw_std / div,
            raw_mean, raw_std, scale, reference_n, k if method != "dnbd" else None,
        )
    return reports


def size_sensitivity(model: ModelSpec, n_list: Sequence[int], samples: int, method: str = "dnbd",
                     seed: int = 0, **kwargs) -> SizeSensitivityReport:
    return size_sensitivity_reports(model, n_list, samples, (method,), seed, **kwargs)[method]


# --------------------------------------------------------------------------
# PCA


def principal_axes(vectors, dims: int, rank_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Top ``dims`` principal axes (as columns) and their variances.

    Axes beyond the numerical rank are zero columns. Each non-zero axis is
    signed so its first non-negligible component is positive.
    """
    x = np.atleast_2d(np.asarray(vectors, dtype=float))
    count, width = x.shape
    if dims > width:
        raise ConfigError(f"dims={dims} exceeds vector length {width}")
    xc = x - x.mean(axis=0)
    denom = max(count - 1, 1)
    if width <= count:
        w, v = np.linalg.eigh(xc.T @ xc / denom)
        order = np.argsort(w)[::-1]
        w, v = w[order], v[:, order]
    else:
        # Same non-zero spectrum via the smaller Gram matrix.
        w, u = np.linalg.eigh(xc @ xc.T / denom)
        order = np.argsort(w)[::-1]
        w, u = w[order], u[:, order]
        pos = np.clip(w, 0.0, None)
        v = xc.T @ u / np.sqrt(np.where(pos > 0, pos * denom, 1.0))
    top = float(w[0]) if w.size else 0.0
    axes = np.zeros((width, dims))
    variances = np.zeros(dims)
    rank = int(np.sum(w > rank_tol * max(top, 0.0))) if top > 0 else 0
    keep = min(rank, dims, v.shape[1])
    if keep:
        q, _ = np.linalg.qr(v[:, :keep])
        for j in range(keep):
            col = q[:, j]
            if np.dot(col, v[:, j]) < 0:
                col = -col
            lead = np.flatnonzero(np.abs(col) > 1e-12)
            if lead.size and col[lead[0]] < 0:
                col = -col
            axes[:, j] = col
        variances[:keep] = w[:keep]
    return axes, variances


def pca_project(vectors, dims: int) -> np.ndarray:
    x = np.atleast_2d(np.asarray(vectors, dtype=float))
    axes, _ = principal_axes(x, dims)
    return (x - x.mean(axis=0)) @ axes


def _segment_distance(p1, q1, p2, q2) -> float:
    # Closest points between segments p1q1 and p2q2 (Ericson, RTCD 5.1.9).
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    eps = 1e-300
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s, t = 0.0, min(max(f / e, 0.0), 1.0)
    else:
        c = d1 @ r
        if e <= eps:
            t, s = 0.0, min(max(-c / a, 0.0), 1.0)
        else:
            b = d1 @ d2
            den = a * e - b * b
            s = min(max((b * f - c * e) / den, 0.0), 1.0) if den > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t, s = 1.0, min(max((b - c) / a, 0.0), 1.0)
    return float(np.linalg.norm((p1 + d1 * s) - (p2 + d2 * t)))


def polyline_is_simple(points, tol: float = 1e-12) -> bool:
    """True when consecutive segments meet only at shared vertices."""
    pts = np.asarray(points, dtype=float)
    nseg = len(pts) - 1
    for i in range(nseg):
        if np.linalg.norm(pts[i + 1] - pts[i]) <= tol:
            return False
    for i in range(nseg - 1):
        # Adjacent segments overlap only if the path folds straight back.
        a, b, c = pts[i], pts[i + 1], pts[i + 2]
        u, v = a - b, c - b
        cos = u @ v / (np.linalg.norm(u) * np.linalg.norm(v))
        if cos > 1.0 - 1e-12:
            return False
        for j in range(i + 2, nseg):
            if _segment_distance(pts[i], pts[i + 1], pts[j], pts[j + 1]) <= tol:
                return False
    return True


# --------------------------------------------------------------------------
# Watts-Strogatz manifold


@dataclass
class WSManifold:
    n: int
    cells: list[tuple[float, int]]
    mean_embeddings: np.ndarray
    projected: np.ndarray
    embed_k: int

    def curve(self, p: float) -> np.ndarray:
        """Projected points for one rewiring probability, in k-grid order."""
        rows = [i for i, (pp, _) in enumerate(self.cells) if pp == p]
        return self.projected[rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "k", "pc1", "pc2", "pc3"])
        for (p, k), row in zip(self.cells, self.projected):
            w.writerow([p, k] + [repr(float(x)) for x in row])
        return buf.getvalue()


def ws_manifold(n: int, p_grid: Sequence[float], k_grid: Sequence[int], samples: int,
                embed_k: int, seed: int = 0, dims: int = 3, threads: int = 1) -> WSManifold:
    """Mean grid embeddings of WS graphs over a (p, k) grid, reduced by PCA.

    Samples with the same k index and sample index share a seed across p, so
    cells differing only in p use common random numbers.
    """
    if not p_grid or not k_grid:
        raise ConfigError("p_grid and k_grid must be non-empty")
    if samples < 1:
        raise ConfigError("samples must be at least 1")
    cells = [(float(p), int(k)) for p in p_grid for k in k_grid]
    jobs = []
    for p, k in cells:
        ki = list(k_grid).index(k)
        for s in range(samples):
            jobs.append(ModelSpec("ws", n, p=p, k=k, seed=derive_seed(seed, ki, s)))

    def one(spec):
        return embed(spectral_cdf(generate(spec)), embed_k)

    vecs = np.array(_map(one, jobs, threads))
    means = vecs.reshape(len(cells), samples, -1).mean(axis=1)
    dims = min(dims, means.shape[1])
    return WSManifold(n, cells, means, pca_project(means, dims), embed_k)


# --------------------------------------------------------------------------
# Classification


@dataclass
class LabeledDataset:
    graphs: list[Graph]
    labels: list[Any]
    names: list[str]

    def __post_init__(self):
        if not (len(self.graphs) == len(self.labels) == len(self.names)):
            raise ConfigError("graphs, labels and names must have equal length")


def synthetic_dataset(families: Sequence[dict] = TABLE1_FAMILIES, size_mean: float = 200.0,
                      size_sigma: float = math.sqrt(40.0), seed: int = 0,
                      min_size: int = 50) -> LabeledDataset:
    """Graphs from several families with sizes ~ round(Normal(mean, sigma))."""
    graphs, labels, names = [], [], []
    for fi, fam in enumerate(families):
        label = fam.get("label", fam["family"].upper())
        for i in range(int(fam["count"])):
            size_rng = np.random.default_rng(derive_seed(seed, fi, i, 0))
            n = sample_size(size_rng, size_mean, size_sigma, min_size)
            spec = ModelSpec(fam["family"], n, p=fam.get("p"), k=fam.get("k"), d=fam.get("d"),
                             m_attach=fam.get("m_attach"), seed=derive_seed(seed, fi, i, 1))
            graphs.append(generate(spec))
            labels.append(label)
            names.append(f"{label}_{i:03d}")
    return LabeledDataset(graphs, labels, names)


@dataclass
class Metrics:
    recall: float
    precision: float
    accuracy: float


@dataclass
class FoldResult:
    fold: int
    train: Metrics
    test: Metrics
    train_confusion: np.ndarray
    test_confusion: np.ndarray


@dataclass
class ClassificationReport:
    classes: list[Any]
    folds: list[FoldResult] = field(default_factory=list)

    def _mean(self, split: str) -> Metrics:
        ms = [getattr(f, split) for f in self.folds]
        return Metrics(*(float(np.mean([getattr(m, a) for m in ms])) for a in ("recall", "precision", "accuracy")))

    @property
    def train(self) -> Metrics:
        return self._mean("train")

    @property
    def test(self) -> Metrics:
        return self._mean("test")

    def to_csv(self, method: str = "") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "split", "fold", "recall", "precision", "accuracy"])
        rows = [(str(f.fold), f) for f in self.folds]
        for fold, f in rows:
            for split in ("train", "test"):
                m = getattr(f, split)
                w.writerow([method, split, fold, repr(m.recall), repr(m.precision), repr(m.accuracy)])
        for split in ("train", "test"):
            m = getattr(self, split)
            w.writerow([method, split, "mean", repr(m.recall), repr(m.precision), repr(m.accuracy)])
        return buf.getvalue()


def _sorted_classes(labels):
    uniq = set(labels)
    try:
        return sorted(uniq)
    except TypeError:
        return sorted(uniq, key=str)


def stratified_folds(labels, folds: int, seed: int, rank: np.ndarray | None = None) -> np.ndarray:
    """Fold index per item; each class is spread round-robin over a seeded shuffle."""
    labels = list(labels)
    classes = _sorted_classes(labels)
    if rank is None:
        rank = np.arange(len(labels))
    counts = Counter(labels)
    short = {c: counts[c] for c in classes if counts[c] < folds}
    if short:
        raise ConfigError(f"every class needs at least {folds} members; too few in {short}")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=int)
    for c in classes:
        members = sorted((i for i, y in enumerate(labels) if y == c), key=lambda i: rank[i])
        perm = rng.permutation(len(members))
        for pos, idx in enumerate(perm):
            assignment[members[idx]] = pos % folds
    return assignment


def _canonical_rank(values: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Ordering that depends only on (label, multiset of distances), so results
    # do not change when items are permuted consistently.
    keys = sorted(range(len(y)), key=lambda i: (y[i], tuple(np.sort(values[i]))))
    rank = np.empty(len(y), dtype=int)
    rank[keys] = np.arange(len(y))
    return rank


def _vote(values, y, rank, i, pool, k, nclass) -> int:
    cand = pool[pool != i]
    order = np.lexsort((rank[cand], values[i, cand]))
    nearest = cand[order[:k]]
    votes = np.bincount(y[nearest], minlength=nclass)
    dist_sum = np.bincount(y[nearest], weights=values[i, nearest], minlength=nclass)
    best = np.flatnonzero(votes == votes.max())
    return int(min(best, key=lambda c: (dist_sum[c], c)))


def _metrics(truth, pred, nclass) -> tuple[Metrics, np.ndarray]:
    conf = np.zeros((nclass, nclass), dtype=int)
    np.add.at(conf, (truth, pred), 1)
    diag = np.diag(conf).astype(float)
    rows, cols = conf.sum(axis=1), conf.sum(axis=0)
    present = rows > 0
    recall = float(np.mean(diag[present] / rows[present]))
    precision = float(np.mean(np.where(cols[present] > 0, diag[present] / np.maximum(cols[present], 1), 0.0)))
    accuracy = float(diag.sum() / conf.sum())
    return Metrics(recall, precision, accuracy), conf


def knn_classify(dm, labels, k_neighbors: int = 10, folds: int = 10, seed: int = 0) -> ClassificationReport:
    """k-nearest-neighbour classification with stratified k-fold validation.

    Votes are tied-broken by the smaller summed distance, then the smaller
    class. Training scores classify each training point from the other
    training points. Precision and recall are macro-averaged.
    """
    values = np.asarray(dm.values if isinstance(dm, DistanceMatrix) else dm, dtype=float)
    labels = list(labels)
    if values.shape != (len(labels), len(labels)):
        raise ConfigError(f"distance matrix shape {values.shape} does not match {len(labels)} labels")
    if folds < 2:
        raise ConfigError("folds must be at least 2")
    if k_neighbors < 1:
        raise ConfigError("k_neighbors must be at least 1")
    classes = _sorted_classes(labels)
    if len(classes) < 2:
        raise ConfigError("classification needs at least two classes")
    cindex = {c: i for i, c in enumerate(classes)}
    y = np.array([cindex[c] for c in labels])
    rank = _canonical_rank(values, y)
    assignment = stratified_folds(labels, folds, seed, rank)
    nclass = len(classes)

    report = ClassificationReport(classes)
    for f in range(folds):
        test = np.flatnonzero(assignment == f)
        train = np.flatnonzero(assignment != f)
        test_pred = np.array([_vote(values, y, rank, i, train, k_neighbors, nclass) for i in test])
        train_pred = np.array([_vote(values, y, rank, i, train, k_neighbors, nclass) for i in train])
        test_m, test_c = _metrics(y[test], test_pred, nclass)
        train_m, train_c = _metrics(y[train], train_pred, nclass)
        report.folds.append(FoldResult(f, train_m, test_m, train_c, test_c))
    return report
