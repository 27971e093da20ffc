"""Non-learning recovery baselines: global top pairs and a kNN graph."""
import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import UsageError
from .graph import Graph


def cosine_similarity_matrix(h) -> np.ndarray:
    """Exactly symmetric cosine-similarity matrix of the rows of ``h``."""
    x = h.data if isinstance(h, EmbeddingMatrix) else np.asarray(h, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    norms[norms == 0] = 1.0
    xn = x / norms[:, None]
    s = xn @ xn.T
    return (s + s.T) / 2.0


def edge_budget(k, n: int) -> int:
    return int(np.floor(k * n / 2.0))


def _rank_pairs(sim, iu, ju):
    # descending similarity, ties by (u, v) ascending
    return np.lexsort((ju, iu, -sim))


def direct_recovery(h, k) -> Graph:
    """Keep the ``floor(k n / 2)`` most cosine-similar node pairs."""
    s = cosine_similarity_matrix(h)
    n = s.shape[0]
    budget = edge_budget(k, n)
    if budget > n * (n - 1) // 2:
        raise UsageError(f"edge budget {budget} exceeds the {n * (n - 1) // 2} available pairs")
    iu, ju = np.triu_indices(n, 1)
    order = _rank_pairs(s[iu, ju], iu, ju)[:budget]
    return Graph.from_edges(n, np.stack([iu[order], ju[order]], axis=1))


def knn_neighbors(sim: np.ndarray, k: int) -> np.ndarray:
    """Row-wise indices of the ``k`` most similar other nodes (ties by smaller index)."""
    n = sim.shape[0]
    s = sim.copy()
    np.fill_diagonal(s, -np.inf)
    cols = np.broadcast_to(np.arange(n), (n, n))
    order = np.lexsort((cols, -s), axis=1)
    return order[:, :k]


def knn_graph(h, k: int, trim: bool = True) -> Graph:
    """Union-symmetrised cosine kNN graph.

    When the union exceeds ``floor(k n / 2)`` edges the least similar ones are
    dropped so that all baselines share the same graph size.
    """
    s = cosine_similarity_matrix(h)
    n = s.shape[0]
    k = int(k)
    if not 1 <= k < n:
        raise UsageError(f"need 1 <= k < n, got k={k}, n={n}")
    nbrs = knn_neighbors(s, k)
    rows = np.repeat(np.arange(n), k)
    g = Graph.from_edges(n, np.stack([rows, nbrs.ravel()], axis=1))
    budget = edge_budget(k, n)
    if not trim or g.num_edges <= budget:
        return g
    e = g.edges()
    order = _rank_pairs(s[e[:, 0], e[:, 1]], e[:, 0], e[:, 1])[:budget]
    return Graph.from_edges(n, e[order])
