"""Attack-quality metrics comparing a recovered graph with the original."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import UsageError
from .graph import Graph, clustering_coefficients, count_triangles, jdd


def _check_same_n(g_o: Graph, g_r: Graph):
    if g_o.n != g_r.n:
        raise UsageError(f"graphs differ in node count: {g_o.n} vs {g_r.n}")


def _edge_keys(g: Graph) -> np.ndarray:
    e = g.edges()
    return e[:, 0] * g.n + e[:, 1]


def edge_prf(g_o: Graph, g_r: Graph):
    """Precision, recall and F1 of the recovered edge set."""
    _check_same_n(g_o, g_r)
    hits = np.intersect1d(_edge_keys(g_o), _edge_keys(g_r), assume_unique=True).size
    p = hits / g_r.num_edges if g_r.num_edges else 0.0
    r = hits / g_o.num_edges if g_o.num_edges else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def jdd_jaccard(g_o: Graph, g_r: Graph) -> float:
    """Generalised (min/max) Jaccard similarity of the two joint degree distributions."""
    _check_same_n(g_o, g_r)
    ho, hr = jdd(g_o).entries, jdd(g_r).entries
    keys = set(ho) | set(hr)
    if not keys:
        return 1.0
    num = sum(min(ho.get(k, 0), hr.get(k, 0)) for k in keys)
    den = sum(max(ho.get(k, 0), hr.get(k, 0)) for k in keys)
    return num / den


def frobenius_error(g_o: Graph, g_r: Graph) -> float:
    """``||A_O - A_R||_F / ||A_O||_F``; both adjacencies are 0/1 so this is a count ratio."""
    _check_same_n(g_o, g_r)
    if g_o.num_edges == 0:
        raise ZeroDivisionError("relative Frobenius error undefined for an empty original graph")
    common = np.intersect1d(_edge_keys(g_o), _edge_keys(g_r), assume_unique=True).size
    flipped = g_o.num_edges + g_r.num_edges - 2 * common
    return math.sqrt(2 * flipped) / math.sqrt(2 * g_o.num_edges)


def relative_error(measured: float, truth: float):
    """``|measured - truth| / truth``, or ``None`` when ``truth`` is zero."""
    if truth == 0:
        return None
    return abs(measured - truth) / abs(truth)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    jdd_jaccard: float
    frobenius_error: float | None
    triangle_error: float | None
    clustering_error: float | None
    edges_original: int
    edges_recovered: int
    undefined: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(g_o: Graph, g_r: Graph) -> EvalReport:
    p, r, f1 = edge_prf(g_o, g_r)
    fro = frobenius_error(g_o, g_r) if g_o.num_edges else None
    tri = relative_error(count_triangles(g_r), count_triangles(g_o))
    clu = relative_error(clustering_coefficients(g_r)[1], clustering_coefficients(g_o)[1])
    undefined = [name for name, v in (("frobenius_error", fro), ("triangle_error", tri),
                                      ("clustering_error", clu)) if v is None]
    return EvalReport(p, r, f1, jdd_jaccard(g_o, g_r), fro, tri, clu,
                      g_o.num_edges, g_r.num_edges, undefined)
