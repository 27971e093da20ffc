"""Learnable multi-head weighted cosine distance and Gumbel-Top-k graph sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import NumericError, UsageError, ValidationError
from .graph import Graph

PROB_EPS = 1e-7


@dataclass(frozen=True, eq=False)
class MetricHeads:
    """``m x d`` weight matrix; head ``i`` rescales coordinates by ``W[i]``."""

    W: np.ndarray

    def __post_init__(self):
        w = np.array(self.W, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 1:
            raise ValidationError(f"heads must be an m x d matrix with m >= 1, got {w.shape}")
        if not np.isfinite(w).all():
            raise NumericError("non-finite metric head weight")
        w.setflags(write=False)
        object.__setattr__(self, "W", w)

    @classmethod
    def ones(cls, m: int, d: int) -> "MetricHeads":
        return cls(np.ones((m, d)))

    @property
    def m(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True, eq=False)
class EdgeProbabilityMatrix:
    """Edge probabilities ``exp(-tau * phi)``; the diagonal is stored as 0 so it is never sampled.

    ``logp`` keeps ``-tau * phi`` exactly, so large temperatures do not lose
    the ranking of pairs whose probabilities underflow to 0.
    """

    P: np.ndarray
    tau: float
    logp: np.ndarray = None

    def log(self) -> np.ndarray:
        if self.logp is not None:
            return self.logp.copy()
        with np.errstate(divide="ignore"):
            return np.log(self.P)


def _as_array(h):
    return h.data if isinstance(h, EmbeddingMatrix) else np.asarray(h, dtype=np.float64)


def cosine_distance(hv, hu) -> float:
    hv, hu = np.asarray(hv, dtype=np.float64), np.asarray(hu, dtype=np.float64)
    nv, nu = np.linalg.norm(hv), np.linalg.norm(hu)
    if nv == 0 or nu == 0:
        raise ValidationError("cosine distance undefined for a zero vector")
    return float(1.0 - np.dot(hv, hu) / (nv * nu))


def multihead_distance(hv, hu, heads: MetricHeads) -> float:
    """``1 - mean_i cos(w_i * hv, w_i * hu)``; a head that zeroes either vector contributes cos = 0."""
    hv, hu = np.asarray(hv, dtype=np.float64), np.asarray(hu, dtype=np.float64)
    total = 0.0
    for w in heads.W:
        a, b = w * hv, w * hu
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na > 0 and nb > 0:
            total += np.dot(a, b) / (na * nb)
    return float(1.0 - total / heads.m)


def pairwise_distance(h, heads: MetricHeads = None) -> np.ndarray:
    """All-pairs multi-head distance matrix (plain cosine distance when ``heads`` is None)."""
    x = _as_array(h)
    W = np.ones((1, x.shape[1])) if heads is None else heads.W
    if W.shape[1] != x.shape[1]:
        raise UsageError(f"heads have dimension {W.shape[1]}, embeddings {x.shape[1]}")
    acc = np.zeros((x.shape[0], x.shape[0]))
    for w in W:
        xw = x * w
        norms = np.linalg.norm(xw, axis=1)
        nz = norms > 0
        xw[nz] /= norms[nz, None]
        xw[~nz] = 0.0
        acc += xw @ xw.T
    phi = 1.0 - acc / W.shape[0]
    phi = (phi + phi.T) / 2.0
    np.fill_diagonal(phi, 0.0)
    return phi


def edge_probabilities(h, heads: MetricHeads = None, tau: float = 1.0) -> EdgeProbabilityMatrix:
    if tau <= 0:
        raise UsageError(f"temperature must be positive, got {tau}")
    logp = -tau * pairwise_distance(h, heads)
    np.fill_diagonal(logp, -np.inf)
    return EdgeProbabilityMatrix(np.exp(logp), float(tau), logp)


def gumbel_topk_rows(logp: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Per-row Gumbel-Top-k: indices of the ``k`` largest ``logp + Gumbel(0, 1)`` entries.

    Rows come back ordered by perturbed score (an ordered sample without
    replacement from the row's categorical distribution).
    """
    n_rows, n_cols = logp.shape
    u = rng.random((n_rows, n_cols))
    with np.errstate(divide="ignore"):
        gumbel = -np.log(-np.log(u))
    scores = logp + gumbel
    top = np.argpartition(-scores, k - 1, axis=1)[:, :k]
    order = np.argsort(-np.take_along_axis(scores, top, axis=1), axis=1, kind="stable")
    return np.take_along_axis(top, order, axis=1)


def gumbel_topk_graph(P: EdgeProbabilityMatrix, k: int, seed) -> Graph:
    """Sample ``k`` neighbours per node and union-symmetrise; every node ends with degree >= k."""
    n = P.P.shape[0]
    k = int(k)
    if not 1 <= k < n:
        raise UsageError(f"need 1 <= k < n, got k={k}, n={n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    logp = P.log()
    np.fill_diagonal(logp, -np.inf)
    nbrs = gumbel_topk_rows(logp, k, rng)
    rows = np.repeat(np.arange(n), k)
    return Graph.from_edges(n, np.stack([rows, nbrs.ravel()], axis=1))


# -- metric fitting ---------------------------------------------------------


def sample_training_pairs(a: Graph, neg_ratio: float, rng: np.random.Generator):
    """Edges of ``a`` labelled 1 plus ``neg_ratio * |E|`` uniform non-edges labelled 0."""
    pos = a.edges()
    n = a.n
    n_neg = int(round(neg_ratio * len(pos)))
    max_neg = n * (n - 1) // 2 - len(pos)
    n_neg = min(n_neg, max_neg)
    pos_keys = pos[:, 0] * n + pos[:, 1]
    neg_keys = np.empty(0, dtype=np.int64)
    while neg_keys.size < n_neg:
        draw = rng.integers(0, n, size=(2 * (n_neg - neg_keys.size) + 8, 2))
        lo, hi = draw.min(axis=1), draw.max(axis=1)
        keys = (lo * n + hi)[lo != hi]
        _, first = np.unique(keys, return_index=True)
        keys = keys[np.sort(first)]  # de-duplicate, keep draw order
        keys = keys[~np.isin(keys, pos_keys) & ~np.isin(keys, neg_keys)]
        neg_keys = np.concatenate([neg_keys, keys[: n_neg - neg_keys.size]])
    neg = np.stack([neg_keys // n, neg_keys % n], axis=1)
    pairs = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    return pairs, labels


def metric_loss_and_grad(W: np.ndarray, x: np.ndarray, y: np.ndarray, labels: np.ndarray,
                         tau: float):
    """Mean BCE of ``p = exp(-tau * phi)`` over the pairs ``(x[p], y[p])`` and its gradient in ``W``."""
    m = W.shape[0]
    w2 = W * W
    xy, xx, yy = x * y, x * x, y * y
    s = xy @ w2.T
    a = xx @ w2.T
    b = yy @ w2.T
    root = np.sqrt(a * b)
    ok = root > 0
    safe = np.where(ok, root, 1.0)
    cos = np.where(ok, s / safe, 0.0)
    phi = 1.0 - cos.mean(axis=1)
    p = np.exp(-tau * phi)
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    loss = -np.mean(labels * np.log(pc) + (1.0 - labels) * np.log1p(-pc))

    inside = (p > PROB_EPS) & (p < 1.0 - PROB_EPS)
    # dL/dphi per pair, mean reduction
    odds = p / np.where(inside, 1.0 - p, 1.0)
    dphi = np.where(inside, labels * tau - (1.0 - labels) * tau * odds, 0.0) / len(labels)
    g = (-dphi / m)[:, None] * ok  # dL/dcos, shape (P, m)
    g_over = g / safe
    ga = g_over * s / np.where(ok, a, 1.0) / 2.0
    gb = g_over * s / np.where(ok, b, 1.0) / 2.0
    grad = 2.0 * W * (g_over.T @ xy - ga.T @ xx - gb.T @ yy)
    return float(loss), grad


def fit_metric(heads: MetricHeads, h, a: Graph, steps: int = 5, lr: float = 0.01,
               neg_ratio: float = 5.0, seed=0, tau: float = 1.0, return_trace: bool = False):
    """Fit the head weights so that ``exp(-tau * phi)`` classifies the edges of ``a``.

    Plain gradient descent with step halving: a step that would raise the
    loss is retried at half the rate (up to 30 times), so accepted steps
    never increase the loss.
    """
    if a.num_edges < 1:
        raise ValidationError("metric supervision graph has no edges")
    trace = []
    if steps <= 0:
        return (heads, trace) if return_trace else heads
    x = _as_array(h)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pairs, labels = sample_training_pairs(a, neg_ratio, rng)
    xs, ys = x[pairs[:, 0]], x[pairs[:, 1]]
    W = heads.W.copy()
    loss, grad = metric_loss_and_grad(W, xs, ys, labels, tau)
    trace.append(loss)
    for step in range(steps):
        if not np.isfinite(loss) or not np.isfinite(grad).all():
            raise NumericError(f"metric fitting diverged at step {step}")
        rate = lr
        for _ in range(30):
            W_new = W - rate * grad
            new_loss, new_grad = metric_loss_and_grad(W_new, xs, ys, labels, tau)
            if np.isfinite(new_loss) and new_loss <= loss:
                W, loss, grad = W_new, new_loss, new_grad
                break
            rate /= 2.0
        trace.append(loss)
    out = MetricHeads(W)
    return (out, trace) if return_trace else out
