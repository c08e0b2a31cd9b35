"""Non-backtracking operator, its 2n x 2n linearisation and their spectra."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError
from .graph_core import Graph

# Eigenvalues closer than this (relative to max(1, radius)) are treated as one
# cluster and replaced by the cluster mean. Defective eigenvalues such as the
# double root at 1 of a cycle split by ~sqrt(eps) under LAPACK; their mean is
# accurate to ~eps.
CLUSTER_TOL = 1e-6
# Spectral radius at or below 1 + DEGENERATE_TOL disables the log rescaling.
DEGENERATE_TOL = 1e-9
# Eigenvalues with modulus at or below ZERO_TOL get argument 0.
ZERO_TOL = 1e-12
# Rescaled magnitudes within SNAP_TOL of 0 or 1 are snapped onto the boundary.
SNAP_TOL = 1e-9

DEFAULT_MAX_CYCLE_LENGTH = 12


@dataclass(frozen=True, eq=False)
class NBMatrix:
    """Hashimoto matrix on the 2m directed edges, sorted by (source, target)."""

    directed_edges: tuple[tuple[int, int], ...]
    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True, eq=False)
class ComplexSpectrum:
    eigenvalues: np.ndarray
    source_dim: int
    radius: float

    def __len__(self):
        return self.eigenvalues.size

    def to_json(self) -> dict:
        order = np.lexsort((-self.eigenvalues.imag, -self.eigenvalues.real))
        ev = self.eigenvalues[order]
        return {
            "radius": float(self.radius),
            "source_dim": int(self.source_dim),
            "eigenvalues": [{"re": float(z.real), "im": float(z.imag)} for z in ev],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ComplexSpectrum":
        ev = np.array([complex(e["re"], e["im"]) for e in payload["eigenvalues"]], dtype=complex)
        return cls(ev, int(payload["source_dim"]), float(payload["radius"]))


@dataclass(frozen=True, eq=False)
class RescaledSpectrum:
    """Upper-half-plane eigenvalues in polar form after log rescaling.

    ``total_count`` is the size of the full spectrum, including the
    lower-half-plane conjugates that are not stored.
    """

    magnitudes: np.ndarray
    arguments: np.ndarray
    total_count: int

    def __len__(self):
        return self.magnitudes.size

    def to_json(self) -> dict:
        return {
            "total_count": int(self.total_count),
            "points": [
                {"r": float(r), "theta": float(t)}
                for r, t in zip(self.magnitudes, self.arguments)
            ],
        }


def directed_edges(g: Graph) -> list[tuple[int, int]]:
    out = [(u, v) for u, v in g.edges] + [(v, u) for u, v in g.edges]
    out.sort()
    return out


def build_nb_matrix(g: Graph) -> NBMatrix:
    """Entry ((u->v), (x->y)) is 1 exactly when x == v and y != u."""
    darcs = directed_edges(g)
    index = {e: i for i, e in enumerate(darcs)}
    adj = g.adjacency
    rows, cols = [], []
    for i, (u, v) in enumerate(darcs):
        for y in sorted(adj[v]):
            if y != u:
                rows.append(i)
                cols.append(index[(v, y)])
    size = len(darcs)
    mat = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(size, size)
    )
    return NBMatrix(tuple(darcs), mat)


def build_reduced_nb_matrix(g: Graph) -> np.ndarray:
    """Dense block matrix ``[[A, I - D], [I, 0]]`` of size 2n.

    The caller is expected to pass a two-core; nothing here enforces it.
    """
    n = g.n
    out = np.zeros((2 * n, 2 * n))
    if n == 0:
        return out
    out[:n, :n] = g.adjacency_matrix()
    out[:n, n:] = np.diag(1.0 - g.degrees)
    out[n:, :n] = np.eye(n)
    return out


def eigenvalues(mat, cluster_tol: float = CLUSTER_TOL) -> ComplexSpectrum:
    """All eigenvalues of a real square matrix, with multiplicity.

    Uses LAPACK's Hessenberg + shifted QR driver. Tight clusters are replaced
    by their mean (see ``CLUSTER_TOL``); pass ``cluster_tol=0`` to get the raw
    eigensolver output.
    """
    if sp.issparse(mat):
        mat = mat.toarray()
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    dim = a.shape[0]
    if dim == 0:
        return ComplexSpectrum(np.zeros(0, dtype=complex), 0, 0.0)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    try:
        ev = np.linalg.eigvals(a).astype(complex)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration did not converge for a {dim}x{dim} matrix") from exc
    if cluster_tol > 0:
        scale = max(1.0, float(np.max(np.abs(ev))))
        ev = merge_clusters(ev, cluster_tol * scale)
    return ComplexSpectrum(ev, dim, float(np.max(np.abs(ev))))


def merge_clusters(ev: np.ndarray, tol: float) -> np.ndarray:
    """Replace single-linkage clusters of eigenvalues within ``tol`` by their mean."""
    n = ev.size
    order = np.argsort(ev.real, kind="stable")
    re = ev.real[order]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    merged = False
    for a in range(n):
        b = a + 1
        while b < n and re[b] - re[a] <= tol:
            if abs(ev[order[a]] - ev[order[b]]) <= tol:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[rb] = ra
                    merged = True
            b += 1
    if not merged:
        return ev
    roots = np.array([find(i) for i in range(n)])
    sorted_ev = ev[order]
    out = sorted_ev.copy()
    for r in np.unique(roots):
        members = np.flatnonzero(roots == r)
        if members.size > 1:
            out[members] = sorted_ev[members].mean()
    result = np.empty_like(ev)
    result[order] = out
    return result


def nb_spectrum(g: Graph) -> ComplexSpectrum:
    """Spectrum of the reduced matrix of ``g`` (pass a two-core)."""
    return eigenvalues(build_reduced_nb_matrix(g))


def nb_cycle_count(g: Graph, k: int, max_k: int = DEFAULT_MAX_CYCLE_LENGTH) -> int:
    """Exact ``trace(B**k)``: closed non-backtracking walks of length ``k``."""
    if k < 1:
        raise ValueError(f"cycle length must be positive, got {k}")
    if k > max_k:
        raise ValueError(f"cycle length {k} exceeds the configured cap {max_k}")
    b = build_nb_matrix(g).matrix
    if b.shape[0] == 0:
        return 0
    branching = max(int(b.sum(axis=0).max()), 1)
    # Every entry of B**j is at most branching**j, and the trace sums 2m of them.
    bound = b.shape[0] * branching**k
    if bound < 2**62:
        return _trace_power_mod(b, k, None)
    # Multi-modular: B is 0/1, so each product step only adds up to
    # `branching` residues and stays inside int64 for 31-bit moduli.
    residues, moduli, product = [], [], 1
    for p in _large_primes():
        residues.append(_trace_power_mod(b, k, p))
        moduli.append(p)
        product *= p
        if product > 2 * bound:
            break
    else:
        raise NumericalError(f"trace(B^{k}) exceeds the supported integer range")
    return _crt(residues, moduli)


def _trace_power_mod(b, k, modulus):
    power = b.copy()
    for _ in range(k - 1):
        power = power @ b
        if modulus is not None:
            power.data %= modulus
    total = int(power.diagonal().sum())
    return total if modulus is None else total % modulus


@functools.lru_cache(maxsize=None)
def _large_primes(count: int = 64) -> tuple[int, ...]:
    primes, cand = [], 2**31 - 1
    while len(primes) < count:
        if all(cand % d for d in range(3, math.isqrt(cand) + 1, 2)):
            primes.append(cand)
        cand -= 2
    return tuple(primes)


def _crt(residues, moduli) -> int:
    x, m = 0, 1
    for r, p in zip(residues, moduli):
        t = ((r - x) * pow(m, -1, p)) % p
        x += m * t
        m *= p
    return x


def rescale_spectrum(spec: ComplexSpectrum) -> RescaledSpectrum:
    """Map each modulus to ``log_rho |lambda|`` clamped to [0, 1].

    When the spectral radius is not above 1 the log base is meaningless and
    the moduli are only clamped. Arguments are kept; points below the real
    axis are dropped but still counted in ``total_count``.
    """
    ev = spec.eigenvalues
    total = int(ev.size)
    if total == 0:
        return RescaledSpectrum(np.zeros(0), np.zeros(0), 0)
    mod = np.abs(ev)
    rho = spec.radius
    if rho > 1.0 + DEGENERATE_TOL:
        with np.errstate(divide="ignore"):
            mag = np.log(mod) / np.log(rho)
    else:
        mag = mod.copy()
    mag = np.clip(mag, 0.0, 1.0)
    mag[mag <= SNAP_TOL] = 0.0
    mag[mag >= 1.0 - SNAP_TOL] = 1.0

    im = ev.imag
    arg = np.where(im == 0.0, np.where(ev.real >= 0.0, 0.0, np.pi), np.angle(ev))
    arg[mod <= ZERO_TOL] = 0.0
    keep = arg >= 0.0
    order = np.lexsort((arg[keep], mag[keep]))
    return RescaledSpectrum(mag[keep][order], arg[keep][order], total)


def spectrum_json(spec: ComplexSpectrum, rescaled: RescaledSpectrum | None = None) -> str:
    payload = spec.to_json()
    if rescaled is not None:
        payload["rescaled"] = rescaled.to_json()
    return json.dumps(payload, indent=2)
