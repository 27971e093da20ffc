"""Seeded synthetic graphs used by fixtures, tests and the experiment harness."""
import numpy as np

from .graph import Graph


def _upper_pairs(n):
    iu, ju = np.triu_indices(n, 1)
    return iu, ju


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    rng = np.random.default_rng(seed)
    iu, ju = _upper_pairs(n)
    keep = rng.random(iu.size) < p
    return Graph.from_edges(n, np.stack([iu[keep], ju[keep]], axis=1))


def stochastic_block_model(sizes, p_in: float, p_out: float, seed: int) -> Graph:
    """Planted-partition SBM; nodes of block ``b`` are contiguous."""
    sizes = list(sizes)
    n = int(sum(sizes))
    block = np.repeat(np.arange(len(sizes)), sizes)
    rng = np.random.default_rng(seed)
    iu, ju = _upper_pairs(n)
    prob = np.where(block[iu] == block[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    return Graph.from_edges(n, np.stack([iu[keep], ju[keep]], axis=1))


def complete_graph(n: int) -> Graph:
    iu, ju = _upper_pairs(n)
    return Graph.from_edges(n, np.stack([iu, ju], axis=1))


def cycle_graph(n: int) -> Graph:
    v = np.arange(n)
    return Graph.from_edges(n, np.stack([v, (v + 1) % n], axis=1))


def path_graph(n: int) -> Graph:
    v = np.arange(n - 1)
    return Graph.from_edges(n, np.stack([v, v + 1], axis=1))


def star_graph(leaves: int) -> Graph:
    v = np.arange(1, leaves + 1)
    return Graph.from_edges(leaves + 1, np.stack([np.zeros_like(v), v], axis=1))


def circulant_graph(n: int, k: int) -> Graph:
    """``2k``-regular ring lattice: each node joined to its ``k`` nearest ring neighbours per side."""
    v = np.arange(n)
    edges = [np.stack([v, (v + j) % n], axis=1) for j in range(1, k + 1)]
    return Graph.from_edges(n, np.concatenate(edges))


def disjoint_union(*graphs: Graph) -> Graph:
    offset = 0
    parts = []
    for g in graphs:
        parts.append(g.edges() + offset)
        offset += g.n
    return Graph.from_edges(offset, np.concatenate(parts) if parts else np.empty((0, 2)))
