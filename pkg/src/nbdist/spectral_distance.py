"""Empirical spectral CDF, the d-NBD distance and the grid embedding."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NBDistError
from .graph_core import Graph, two_core
from .nb_spectrum import RescaledSpectrum, nb_spectrum, rescale_spectrum

DEFAULT_RESOLUTION = 100
MAX_DISTANCE = 1.0 / math.sqrt(math.pi)
# Slack on the inclusive comparisons. Cycles produce arguments such as 5pi/8
# that sit exactly on sample points, where eigensolver roundoff would
# otherwise decide whether a point is counted.
COMPARE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SpectralCDF:
    """Step function F(r, theta) over the rescaled upper-half-plane spectrum.

    ``denominator`` is 2n of the two-core (or the number of stored points when
    upper-half normalisation is requested). A zero denominator encodes the
    empty two-core, whose CDF is identically zero.
    """

    magnitudes: np.ndarray
    arguments: np.ndarray
    denominator: int

    @classmethod
    def from_rescaled(cls, rs: RescaledSpectrum, upper_half: bool = False) -> "SpectralCDF":
        denom = len(rs) if upper_half else rs.total_count
        return cls(rs.magnitudes, rs.arguments, int(denom))

    @classmethod
    def zero(cls) -> "SpectralCDF":
        return cls(np.zeros(0), np.zeros(0), 0)

    @property
    def is_zero(self) -> bool:
        return self.denominator == 0

    def __call__(self, r: float, theta: float) -> float:
        if self.is_zero:
            return 0.0
        hits = (
            (self.magnitudes <= r + COMPARE_TOL)
            & (self.arguments >= 0.0)
            & (self.arguments <= theta + COMPARE_TOL)
        )
        return float(np.count_nonzero(hits)) / self.denominator

    def counts_on_grid(self, r_values: np.ndarray, theta_values: np.ndarray) -> np.ndarray:
        """Unnormalised counts; rows follow ``theta_values``, columns ``r_values``.

        Both grids must be ascending.
        """
        hist = np.zeros((len(theta_values) + 1, len(r_values) + 1))
        if self.magnitudes.size:
            ir = np.searchsorted(r_values + COMPARE_TOL, self.magnitudes, side="left")
            it = np.searchsorted(theta_values + COMPARE_TOL, self.arguments, side="left")
            np.add.at(hist, (it, ir), 1.0)
        return hist.cumsum(axis=0).cumsum(axis=1)[:-1, :-1]

    def on_grid(self, r_values, theta_values) -> np.ndarray:
        r_values = np.asarray(r_values, dtype=float)
        theta_values = np.asarray(theta_values, dtype=float)
        if self.is_zero:
            return np.zeros((theta_values.size, r_values.size))
        return self.counts_on_grid(r_values, theta_values) / self.denominator


def spectral_cdf(g: Graph, upper_half: bool = False) -> SpectralCDF:
    """two-core -> reduced matrix -> eigenvalues -> rescaling -> CDF."""
    core = two_core(g)
    if core.n == 0:
        return SpectralCDF.zero()
    rs = rescale_spectrum(nb_spectrum(core))
    return SpectralCDF.from_rescaled(rs, upper_half=upper_half)


def _midpoints(resolution: int, upper: float) -> np.ndarray:
    return (np.arange(resolution) + 0.5) * (upper / resolution)


def dnbd(f1: SpectralCDF, f2: SpectralCDF, resolution: int = DEFAULT_RESOLUTION) -> float:
    """(1/pi) * L2 norm of F1 - F2 over [0,1] x [0,pi], midpoint rule."""
    if resolution < 2:
        raise ValueError(f"resolution must be at least 2, got {resolution}")
    if f1.is_zero and f2.is_zero:
        return 0.0
    r = _midpoints(resolution, 1.0)
    theta = _midpoints(resolution, math.pi)
    # Signed histogram so only one resolution^2 array is materialised. Weights
    # are integers over a common denominator, so the cumulative sums are exact
    # and identical CDFs cancel to zero.
    d1 = f1.denominator if not f1.is_zero else 1
    d2 = f2.denominator if not f2.is_zero else 1
    hist = np.zeros((resolution + 1, resolution + 1))
    for f, weight in ((f1, float(d2)), (f2, -float(d1))):
        if f.is_zero or f.magnitudes.size == 0:
            continue
        ir = np.searchsorted(r + COMPARE_TOL, f.magnitudes, side="left")
        it = np.searchsorted(theta + COMPARE_TOL, f.arguments, side="left")
        np.add.at(hist, (it, ir), weight)
    diff = hist.cumsum(axis=0).cumsum(axis=1)[:-1, :-1]
    diff /= float(d1) * float(d2)
    cell = (1.0 / resolution) * (math.pi / resolution)
    integral = float(np.einsum("ij,ij->", diff, diff)) * cell
    return min(math.sqrt(integral) / math.pi, MAX_DISTANCE)


def embedding_grid(k: int) -> tuple[np.ndarray, np.ndarray]:
    if k < 2:
        raise ValueError(f"embedding grid needs k >= 2, got {k}")
    return np.linspace(0.0, 1.0, k), np.linspace(0.0, math.pi, k)


def embed(f: SpectralCDF, k: int) -> np.ndarray:
    """Sample F on the k x k grid with both endpoints, theta-major.

    Entry ``j * k + i`` is ``F(r_i, theta_j)``.
    """
    r, theta = embedding_grid(k)
    return f.on_grid(r, theta).reshape(-1)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    labels: tuple[str, ...]
    values: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([""] + list(self.labels))
        for label, row in zip(self.labels, self.values):
            writer.writerow([label] + [repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DistanceMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        labels = tuple(rows[0][1:])
        values = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
        return cls(labels, values)


def embeddings_csv(labels: Sequence[str], vectors: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for label, vec in zip(labels, vectors):
        writer.writerow([label] + [repr(float(x)) for x in vec])
    return buf.getvalue()


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def compute_cdfs(graphs: Sequence[Graph], labels: Sequence[str], threads: int = 1, upper_half: bool = False):
    def one(item):
        label, g = item
        try:
            return spectral_cdf(g, upper_half=upper_half)
        except NBDistError as exc:
            raise type(exc)(f"graph {label}: {exc}") from exc

    return _map(one, list(zip(labels, graphs)), threads)


def cdf_distance_matrix(cdfs: Sequence[SpectralCDF], resolution: int = DEFAULT_RESOLUTION,
                        threads: int = 1) -> np.ndarray:
    n = len(cdfs)
    values = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    dists = _map(lambda ij: dnbd(cdfs[ij[0]], cdfs[ij[1]], resolution), pairs, threads)
    for (i, j), d in zip(pairs, dists):
        values[i, j] = values[j, i] = d
    return values


def pairwise_distances(graphs: Sequence[Graph], resolution: int = DEFAULT_RESOLUTION,
                       labels: Sequence[str] | None = None, threads: int = 1) -> DistanceMatrix:
    """All pairwise d-NBD values; each graph's CDF is computed once."""
    if not graphs:
        raise ValueError("need at least one graph")
    if labels is None:
        labels = [str(i) for i in range(len(graphs))]
    cdfs = compute_cdfs(graphs, labels, threads)
    return DistanceMatrix(tuple(labels), cdf_distance_matrix(cdfs, resolution, threads))
