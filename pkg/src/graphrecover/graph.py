"""Undirected simple graphs, edge-list I/O and structural statistics."""
from __future__ import annotations

import io
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ParseError, ValidationError


class Graph:
    """Immutable undirected simple graph on nodes ``0..n-1``.

    The adjacency is kept as a symmetric CSR matrix with int8 entries; a dense
    view is available through :meth:`to_dense`. Construct graphs with
    :meth:`from_edges` or :meth:`from_dense` rather than the raw constructor.
    """

    __slots__ = ("_n", "_adj", "_edges")

    def __init__(self, n: int, adjacency: sp.csr_matrix):
        self._n = int(n)
        self._adj = adjacency
        self._edges = None

    @classmethod
    def from_edges(cls, n, edges) -> "Graph":
        """Build a graph from an iterable (or ``(m, 2)`` array) of node pairs.

        Duplicate pairs and both orientations collapse to a single edge.
        Self-loops raise :class:`ValidationError`.
        """
        n = int(n)
        if n < 1:
            raise ValidationError("graph needs at least one node")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if (e < 0).any() or (e >= n).any():
                raise ValidationError(f"edge endpoint outside 0..{n - 1}")
            loops = e[:, 0] == e[:, 1]
            if loops.any():
                v = int(e[loops][0, 0])
                raise ValidationError(f"self-loop on node {v}")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        key = np.unique(lo * n + hi)
        lo, hi = key // n, key % n
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        data = np.ones(rows.size, dtype=np.int8)
        adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        adj.sort_indices()
        g = cls(n, adj)
        g._edges = np.stack([lo, hi], axis=1)
        return g

    @classmethod
    def from_dense(cls, a) -> "Graph":
        """Build a graph from a dense symmetric 0/1 matrix (upper triangle is read)."""
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"adjacency must be square, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValidationError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValidationError(f"self-loop on node {int(np.flatnonzero(np.diag(a))[0])}")
        iu, ju = np.nonzero(np.triu(a, 1))
        return cls.from_edges(a.shape[0], np.stack([iu, ju], axis=1))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls.from_edges(n, np.empty((0, 2), dtype=np.int64))

    @property
    def n(self) -> int:
        return self._n

    @property
    def adjacency(self) -> sp.csr_matrix:
        return self._adj

    @property
    def num_edges(self) -> int:
        return int(self._adj.nnz // 2)

    def edges(self) -> np.ndarray:
        """Canonical ``(m, 2)`` edge array with ``u < v``, sorted lexicographically."""
        if self._edges is None:
            coo = sp.triu(self._adj, 1).tocoo()
            order = np.lexsort((coo.col, coo.row))
            self._edges = np.stack([coo.row[order], coo.col[order]], axis=1).astype(np.int64)
        return self._edges

    def edge_set(self) -> set:
        return set(map(tuple, self.edges().tolist()))

    def degrees(self) -> np.ndarray:
        return np.diff(self._adj.indptr).astype(np.int64)

    def neighbors(self, v: int) -> np.ndarray:
        return self._adj.indices[self._adj.indptr[v]:self._adj.indptr[v + 1]]

    def to_dense(self, dtype=np.float64) -> np.ndarray:
        return self._adj.toarray().astype(dtype)

    def relabel(self, perm) -> "Graph":
        """Return the graph with node ``v`` renamed to ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return Graph.from_edges(self._n, perm[self.edges()])

    def subgraph(self, nodes) -> "Graph":
        """Induced subgraph on ``nodes``, relabelled ``0..len(nodes)-1`` in the given order."""
        nodes = np.asarray(nodes, dtype=np.int64)
        sub = self._adj[nodes][:, nodes]
        coo = sp.triu(sub, 1).tocoo()
        return Graph.from_edges(len(nodes), np.stack([coo.row, coo.col], axis=1))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self._n == other._n and np.array_equal(self.edges(), other.edges())

    def __hash__(self):
        return hash((self._n, self.edges().tobytes()))

    def __repr__(self):
        return f"Graph(n={self._n}, edges={self.num_edges})"


def _open_lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r") as fh:
            return fh.read().splitlines()
    if isinstance(source, io.IOBase):
        return source.read().splitlines()
    return list(source)


def load_edge_list(source) -> Graph:
    """Parse a whitespace-separated edge list.

    ``source`` may be a path, an open text stream or an iterable of lines.
    Text after ``#`` is ignored, except for a ``# nodes: N`` header which
    fixes the node count (so trailing isolated nodes survive a round trip).
    Without the header the graph spans ``0..max_id``.
    """
    declared_n = None
    pairs = []
    for lineno, raw in enumerate(_open_lines(source), start=1):
        line, _, comment = raw.partition("#")
        comment = comment.strip()
        if comment.startswith("nodes:"):
            try:
                declared_n = int(comment.split(":", 1)[1])
            except ValueError:
                raise ParseError(f"bad node-count header {raw!r}", lineno) from None
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 2:
            raise ParseError(f"expected two node ids, got {len(tokens)} fields", lineno)
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise ParseError(f"non-integer node id in {line.strip()!r}", lineno) from None
        if u < 0 or v < 0:
            raise ParseError("negative node id", lineno)
        if u == v:
            raise ValidationError(f"line {lineno}: self-loop on node {u}")
        pairs.append((u, v))

    max_id = max((max(p) for p in pairs), default=-1)
    if declared_n is None:
        if not pairs:
            raise ValidationError("edge list is empty and declares no node count")
        n = max_id + 1
    else:
        if declared_n <= max_id:
            raise ValidationError(f"node id {max_id} exceeds declared node count {declared_n}")
        n = declared_n
    return Graph.from_edges(n, np.array(pairs, dtype=np.int64).reshape(-1, 2))


def save_edge_list(g: Graph, dest) -> None:
    """Write ``g`` in canonical form: a node-count header, then sorted ``u v`` lines with ``u < v``."""
    text = "".join([f"# nodes: {g.n}\n"] + [f"{u} {v}\n" for u, v in g.edges().tolist()])
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w") as fh:
            fh.write(text)
    else:
        dest.write(text)


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest connected component.

    Nodes keep their relative order. Equal-size components are resolved in
    favour of the one holding the smallest original node id.
    """
    ncomp, labels = connected_components(g.adjacency, directed=False)
    if ncomp == 1:
        return g
    sizes = np.bincount(labels, minlength=ncomp)
    first = np.full(ncomp, g.n, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(g.n))
    best = min(range(ncomp), key=lambda c: (-sizes[c], first[c]))
    return g.subgraph(np.flatnonzero(labels == best))


def average_degree(g: Graph) -> float:
    return 2.0 * g.num_edges / g.n


def _closed_wedges(g: Graph) -> np.ndarray:
    # (A @ A) * A counts, per node, twice the triangles through it
    a = g.adjacency.astype(np.int64)
    return np.asarray((a @ a).multiply(a).sum(axis=1)).ravel()


def count_triangles(g: Graph) -> int:
    return int(_closed_wedges(g).sum() // 6)


def clustering_coefficients(g: Graph):
    """Per-node clustering coefficients and their plain mean.

    ``c_v = 2 T(v) / (deg(v) (deg(v) - 1))`` where ``T(v)`` is the number of
    triangles through ``v``; nodes of degree 0 or 1 get 0.
    """
    tri2 = _closed_wedges(g).astype(np.float64)  # 2 * T(v)
    deg = g.degrees().astype(np.float64)
    denom = deg * (deg - 1.0)
    c = np.zeros(g.n)
    mask = deg > 1
    c[mask] = tri2[mask] / denom[mask]
    return c, float(c.mean())


@dataclass(frozen=True)
class JddHistogram:
    """Joint degree distribution keyed by ``(k1, k2)`` with ``k1 <= k2``.

    ``entries[(k1, k2)] = mu * m`` with ``mu = 1`` on the diagonal and 2
    otherwise, ``m`` the number of edges joining degree-``k1`` and
    degree-``k2`` nodes.
    """

    entries: dict = field(default_factory=dict)

    def edge_count(self) -> int:
        return sum(w // (1 if k1 == k2 else 2) for (k1, k2), w in self.entries.items())


def jdd(g: Graph) -> JddHistogram:
    deg = g.degrees()
    e = g.edges()
    if len(e) == 0:
        return JddHistogram({})
    du, dv = deg[e[:, 0]], deg[e[:, 1]]
    counts = Counter(zip(np.minimum(du, dv).tolist(), np.maximum(du, dv).tolist()))
    return JddHistogram({k: (1 if k[0] == k[1] else 2) * m for k, m in sorted(counts.items())})
