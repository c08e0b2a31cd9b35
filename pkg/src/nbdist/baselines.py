"""Truncated-spectrum baselines: largest non-backtracking eigenvalues and
largest Laplacian eigenvalues."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph_core import Graph, two_core
from .nb_spectrum import ComplexSpectrum, nb_spectrum

# Relative tolerance under which two sort keys count as tied.
TIE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TruncatedEmbedding:
    alphas: np.ndarray
    betas: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.alphas, self.betas])


def _tolerant_order(keys: list[np.ndarray], tol: float, index: np.ndarray | None = None) -> np.ndarray:
    # Descending sort on keys[0]; runs of values within tol are tied and
    # ordered recursively by the remaining keys.
    if index is None:
        index = np.arange(keys[0].size)
    if index.size <= 1 or not keys:
        return index
    primary = keys[0][index]
    idx = index[np.argsort(-primary, kind="stable")]
    vals = keys[0][idx]
    out = []
    start = 0
    for pos in range(1, idx.size + 1):
        if pos == idx.size or vals[pos - 1] - vals[pos] > tol:
            group = idx[start:pos]
            out.append(_tolerant_order(keys[1:], tol, group) if keys[1:] else group)
            start = pos
    return np.concatenate(out)


def sorted_eigenvalues(spec: ComplexSpectrum) -> np.ndarray:
    """Order by modulus, then real part, then imaginary part, all descending."""
    ev = spec.eigenvalues
    tol = TIE_TOL * max(1.0, spec.radius)
    return ev[_tolerant_order([np.abs(ev), ev.real, ev.imag], tol)]


def nbd_embedding(spec: ComplexSpectrum, k: int) -> TruncatedEmbedding:
    if k < 0:
        raise ConfigError(f"k must be non-negative, got {k}")
    if k > len(spec):
        raise ConfigError(
            f"cannot take the {k} largest eigenvalues of a spectrum of size {len(spec)}"
        )
    top = sorted_eigenvalues(spec)[:k]
    return TruncatedEmbedding(top.real.copy(), top.imag.copy())


def core_spectrum(g: Graph) -> ComplexSpectrum:
    """Reduced-matrix spectrum of the two-core, shared with d-NBD."""
    return nb_spectrum(two_core(g))


def nbd_embedding_distance(s1: ComplexSpectrum, s2: ComplexSpectrum, k: int) -> float:
    limit = min(len(s1), len(s2))
    if k > limit:
        raise ConfigError(
            f"k={k} exceeds min(2n1, 2n2) = min({len(s1)}, {len(s2)}) = {limit}; "
            "only that many eigenvalues can be compared"
        )
    v1 = nbd_embedding(s1, k).vector
    v2 = nbd_embedding(s2, k).vector
    return float(np.linalg.norm(v1 - v2))


def nbd_distance(g1: Graph, g2: Graph, k: int) -> float:
    """Euclidean distance between the k largest non-backtracking eigenvalues."""
    return nbd_embedding_distance(core_spectrum(g1), core_spectrum(g2), k)


def laplacian_spectrum(g: Graph) -> np.ndarray:
    """Eigenvalues of D - A in descending order."""
    if g.n == 0:
        return np.zeros(0)
    lap = np.diag(g.degrees.astype(float)) - g.adjacency_matrix()
    return np.linalg.eigvalsh(lap)[::-1].copy()


def truncated_distance(s1: np.ndarray, s2: np.ndarray, k: int) -> float:
    limit = min(len(s1), len(s2))
    if k < 0 or k > limit:
        raise ConfigError(f"k={k} must lie in [0, {limit}] (smallest spectrum size)")
    return float(np.linalg.norm(s1[:k] - s2[:k]))


def laplacian_distance(g1: Graph, g2: Graph, k: int) -> float:
    return truncated_distance(laplacian_spectrum(g1), laplacian_spectrum(g2), k)
