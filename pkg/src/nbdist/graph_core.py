"""Simple undirected graphs: I/O, two-core extraction and random generators."""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, EdgeListError, GenerationError

Edge = tuple[int, int]

FAMILIES = ("er", "ws", "rr", "ba")


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph on vertices ``0..n-1``.

    ``edges`` is kept sorted with ``u < v`` in every pair, so two graphs with
    the same vertex count and edge set compare equal.
    """

    n: int
    edges: tuple[Edge, ...] = field(default=())

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"vertex count must be non-negative, got {self.n}")
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise ValueError(f"edge ({u}, {v}) is not canonical for n={self.n}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        """Build a graph, dropping self-loops and duplicate edges."""
        canon = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                continue
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            canon.add((u, v) if u < v else (v, u))
        return cls(n, tuple(sorted(canon)))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> tuple[frozenset[int], ...]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return tuple(frozenset(s) for s in nbrs)

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        if self.edges:
            e = np.asarray(self.edges, dtype=np.int64)
            np.add.at(deg, e[:, 0], 1)
            np.add.at(deg, e[:, 1], 1)
        return deg

    def adjacency_matrix(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix as float64."""
        a = np.zeros((self.n, self.n))
        if self.edges:
            e = np.asarray(self.edges, dtype=np.int64)
            a[e[:, 0], e[:, 1]] = 1.0
            a[e[:, 1], e[:, 0]] = 1.0
        return a

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


# --------------------------------------------------------------------------
# Edge-list I/O


def parse_edge_list(data: bytes | str | io.IOBase) -> Graph:
    """Parse a whitespace-separated edge list.

    Lines starting with ``#`` or ``%`` are comments, except for an optional
    ``#vertices N`` directive that fixes the vertex count (to keep isolated
    vertices). Without the directive, labels are compacted to ``0..n-1`` in
    order of first appearance; with it, labels must lie below N and are kept.
    Self-loops and repeated edges are dropped.
    """
    if isinstance(data, (bytes, bytearray)):
        text = data.decode("utf-8")
    elif isinstance(data, str):
        text = data
    else:
        raw = data.read()
        text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw

    declared = None
    label_of: dict[int, int] = {}
    pairs = []
    max_label = -1
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped[0] in "#%":
            tokens = stripped[1:].split()
            if tokens and tokens[0] == "vertices":
                if len(tokens) != 2:
                    raise EdgeListError("expected '#vertices N'", lineno)
                declared = _parse_label(tokens[1], lineno)
            continue
        tokens = stripped.split()
        if len(tokens) < 2:
            raise EdgeListError(f"expected two vertex labels, got {stripped!r}", lineno)
        u = _parse_label(tokens[0], lineno)
        v = _parse_label(tokens[1], lineno)
        max_label = max(max_label, u, v)
        for x in (u, v):
            if x not in label_of:
                label_of[x] = len(label_of)
        pairs.append((label_of[u], label_of[v]))

    if declared is None:
        return Graph.from_edges(len(label_of), pairs)
    if declared < max_label + 1:
        raise EdgeListError(
            f"#vertices {declared} does not cover the largest label {max_label}"
        )
    # A declared vertex count fixes the label space, so labels are kept as is.
    inverse = list(label_of)
    return Graph.from_edges(declared, ((inverse[u], inverse[v]) for u, v in pairs))


def _parse_label(token: str, lineno: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise EdgeListError(f"invalid vertex label {token!r}", lineno) from None
    if value < 0:
        raise EdgeListError(f"negative vertex label {value}", lineno)
    return value


def format_edge_list(g: Graph) -> str:
    lines = [f"#vertices {g.n}"]
    lines.extend(f"{u} {v}" for u, v in g.edges)
    return "\n".join(lines) + "\n"


def read_edge_list(path) -> Graph:
    with open(path, "rb") as fh:
        return parse_edge_list(fh.read())


# --------------------------------------------------------------------------
# Structural operations


def induced_subgraph(g: Graph, keep: Sequence[int]) -> Graph:
    """Subgraph induced by ``keep``, relabelled by the order of ``keep``."""
    new_label = {v: i for i, v in enumerate(keep)}
    edges = [
        (new_label[u], new_label[v])
        for u, v in g.edges
        if u in new_label and v in new_label
    ]
    return Graph.from_edges(len(keep), edges)


def two_core(g: Graph) -> Graph:
    """Iteratively strip vertices of degree at most one.

    The survivors keep their relative order and are relabelled ``0..n'-1``.
    Trees and forests reduce to the empty graph.
    """
    deg = g.degrees.copy()
    removed = np.zeros(g.n, dtype=bool)
    stack = [v for v in range(g.n) if deg[v] <= 1]
    for v in stack:
        removed[v] = True
    adj = g.adjacency
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if removed[u]:
                continue
            deg[u] -= 1
            if deg[u] <= 1:
                removed[u] = True
                stack.append(u)
    keep = np.flatnonzero(~removed).tolist()
    if len(keep) == g.n:
        return g
    return induced_subgraph(g, keep)


def relabel(g: Graph, perm: Sequence[int]) -> Graph:
    """Apply the vertex bijection ``v -> perm[v]``."""
    perm = [int(p) for p in perm]
    if len(perm) != g.n or sorted(perm) != list(range(g.n)):
        raise ValueError(f"perm is not a permutation of 0..{g.n - 1}")
    return Graph.from_edges(g.n, ((perm[u], perm[v]) for u, v in g.edges))


def disjoint_union(g: Graph, h: Graph) -> Graph:
    shifted = ((u + g.n, v + g.n) for u, v in h.edges)
    return Graph.from_edges(g.n + h.n, list(g.edges) + list(shifted))


def degree_multiset(g: Graph) -> Counter:
    return Counter(g.degrees.tolist())


# --------------------------------------------------------------------------
# Random generators


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for an item identified by ``keys``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one random-graph family.

    ``family`` is one of ``er`` (connection probability ``p``), ``ws`` (ring
    degree ``k`` and rewiring probability ``p``), ``rr`` (degree ``d``) or
    ``ba`` (attachments per arriving vertex ``m_attach``).
    """

    family: str
    n: int
    p: float | None = None
    k: int | None = None
    d: int | None = None
    m_attach: int | None = None
    seed: int = 0

    def validate(self) -> None:
        fam, n = self.family, self.n
        if fam not in FAMILIES:
            raise ConfigError(f"unknown model family {fam!r}; expected one of {FAMILIES}")
        if n < 0:
            raise ConfigError(f"n must be non-negative, got {n}")
        if fam in ("er", "ws"):
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ConfigError(f"{fam} needs 0 <= p <= 1, got p={self.p}")
        if fam == "ws" and (self.k is None or not 2 <= self.k <= n - 1):
            raise ConfigError(f"ws needs 2 <= k <= n-1, got k={self.k}, n={n}")
        if fam == "rr":
            d = self.d
            if d is None or not 0 <= d < n:
                raise ConfigError(f"rr needs 0 <= d < n, got d={d}, n={n}")
            if (n * d) % 2:
                raise ConfigError(f"rr needs n*d even, got n={n}, d={d}")
        if fam == "ba" and (self.m_attach is None or not 1 <= self.m_attach < n):
            raise ConfigError(f"ba needs 1 <= m_attach < n, got m_attach={self.m_attach}, n={n}")

    def with_n(self, n: int, seed: int | None = None) -> "ModelSpec":
        return ModelSpec(
            self.family, n, self.p, self.k, self.d, self.m_attach,
            self.seed if seed is None else seed,
        )

    def to_dict(self) -> dict:
        out = {"family": self.family, "n": self.n, "seed": self.seed}
        for name in ("p", "k", "d", "m_attach"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


def generate(spec: ModelSpec) -> Graph:
    """Draw one graph; the result is a pure function of ``spec``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    if spec.family == "er":
        return erdos_renyi(spec.n, spec.p, rng)
    if spec.family == "ws":
        return watts_strogatz(spec.n, spec.k, spec.p, rng)
    if spec.family == "rr":
        return random_regular(spec.n, spec.d, rng)
    return barabasi_albert(spec.n, spec.m_attach, rng)


def erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.size) < p
    return Graph(n, tuple(zip(iu[mask].tolist(), ju[mask].tolist())))


def watts_strogatz(n: int, k: int, p: float, rng: np.random.Generator) -> Graph:
    # Ring offsets 1..ceil(k/2) clockwise; for odd k the last offset is the
    # extra clockwise neighbour.
    reach = (k + 1) // 2
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for j in range(1, reach + 1):
        for i in range(n):
            t = (i + j) % n
            nbrs[i].add(t)
            nbrs[t].add(i)
    for j in range(1, reach + 1):
        for i in range(n):
            t = (i + j) % n
            if t not in nbrs[i] or rng.random() >= p:
                continue
            if len(nbrs[i]) >= n - 1:
                continue
            w = int(rng.integers(n))
            while w == i or w in nbrs[i]:
                w = int(rng.integers(n))
            nbrs[i].discard(t)
            nbrs[t].discard(i)
            nbrs[i].add(w)
            nbrs[w].add(i)
    return Graph.from_edges(n, ((u, v) for u in range(n) for v in nbrs[u] if u < v))


def random_regular(n: int, d: int, rng: np.random.Generator, max_restarts: int = 1000) -> Graph:
    """Configuration-model pairing of stubs with rejection of bad pairs.

    Pairs that would form a self-loop or a repeated edge are returned to the
    stub pool and re-paired; the whole pairing restarts when the leftover
    stubs admit no valid pair.
    """
    if d == 0:
        return Graph(n, ())
    for _ in range(max_restarts):
        edges = _try_regular_pairing(n, d, rng)
        if edges is not None:
            return Graph.from_edges(n, edges)
    raise GenerationError(
        f"random regular pairing failed {max_restarts} consecutive restarts (n={n}, d={d})"
    )


def _try_regular_pairing(n, d, rng):
    edges: set[Edge] = set()
    stubs = np.repeat(np.arange(n), d)
    while stubs.size:
        rng.shuffle(stubs)
        leftover: list[int] = []
        for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
            e = (a, b) if a < b else (b, a)
            if a != b and e not in edges:
                edges.add(e)
            else:
                leftover.extend((a, b))
        if not leftover:
            break
        pending = sorted(set(leftover))
        if not any(
            (u, v) not in edges
            for i, u in enumerate(pending)
            for v in pending[i + 1:]
        ):
            return None
        stubs = np.asarray(leftover)
    return edges


def barabasi_albert(n: int, m_attach: int, rng: np.random.Generator) -> Graph:
    """Preferential attachment grown from a single vertex."""
    edges: list[Edge] = []
    # One entry per edge endpoint, so uniform draws are degree-proportional.
    endpoints: list[int] = []
    for t in range(1, n):
        want = min(m_attach, t)
        targets: set[int] = set()
        if not endpoints:
            targets.update(rng.choice(t, size=want, replace=False).tolist())
        else:
            while len(targets) < want:
                targets.add(endpoints[int(rng.integers(len(endpoints)))])
        for s in sorted(targets):
            edges.append((s, t))
            endpoints.extend((s, t))
    return Graph.from_edges(n, edges)


def sample_size(rng: np.random.Generator, mean: float, sigma: float, minimum: int = 50) -> int:
    return max(minimum, int(round(rng.normal(mean, sigma))))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple((u, v) for u in range(n) for v in range(u + 1, n)))


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, ((i, (i + 1) % n) for i in range(n)))


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, ((i, i + 1) for i in range(n - 1)))
