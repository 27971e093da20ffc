"""Iterative graph recovery from node embeddings.

The loop alternates metric learning on the embedding (which resamples a
candidate graph) with a linear graph autoencoder whose output is mixed
into an anchor, clipped and Bernoulli-sampled into the next graph.

Two structure decoders are available:

``'selfrep'`` (default)
    Propagation consistency. The encoder ``A_hat H Theta`` is trained so
    that it reproduces the observed embedding. Every node's embedding is
    then re-expressed as a non-negative combination of its candidates'
    transformed embeddings ``H Theta``, and a pair's weight is its
    symmetrised coefficient. Neighbours are explained jointly, which
    pairwise scores cannot do. With ``score_cut='otsu'`` the weak
    coefficients are dropped before scaling, so the edge budget derived
    from ``k`` acts as a cap rather than a target.
``'inner'``
    The inner-product decoder ``sigmoid(Z Z^T)``.

Using ``decoder='inner', anchor='seed', tau=1.0, consistency_weight=0``
gives the plain form of the loop.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import nnls
from skimage.filters import threshold_otsu

from .baselines import edge_budget
from .embeddings import EmbeddingMatrix
from .errors import GraphRecoverError, NumericError, UsageError, ValidationError
from .evaluation import edge_prf
from .gae import (Adam, GaeParams, decode, normalize_adjacency, optimize_step,
                  pairwise_sq_distances, total_loss_and_gradients)
from .graph import Graph
from .metric import (MetricHeads, edge_probabilities, fit_metric, gumbel_topk_graph,
                     pairwise_distance)


@dataclass
class AttackConfig:
    """Hyperparameters of one recovery run.

    ``tau=None`` picks the sampling temperature from the data (see
    :func:`auto_temperature`).
    """

    k: int
    tau: float | None = None
    alpha: float = 0.3
    beta: float = 0.1
    eta: float = 0.5
    heads: int = 16
    iters: int = 400
    metric_steps: int = 5
    metric_lr: float = 0.01
    neg_ratio: float = 5.0
    lr: float = 0.01
    gae_steps: int = 5
    loss_weights: tuple = (1.0, 1.0, 1.0)
    consistency_weight: float = 1.0
    rec_mode: str = "frobenius"
    latent_dim: int | None = None
    decoder: str = "selfrep"
    score_cut: str = "otsu"
    anchor: str = "running"
    ablation_steps: int = 200
    feed_latent: bool = False
    early_stop: bool = False
    freeze_theta: bool = False
    seed: int = 0

    def validate(self, n: int = None) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise UsageError(f"k must be a positive integer, got {self.k}")
        if n is not None and self.k >= n:
            raise UsageError(f"k={self.k} must be smaller than the node count {n}")
        if not 0 < self.eta <= 1:
            raise UsageError(f"eta must lie in (0, 1], got {self.eta}")
        if self.iters < 1:
            raise UsageError(f"iters must be >= 1, got {self.iters}")
        if self.tau is not None and self.tau <= 0:
            raise UsageError(f"tau must be positive, got {self.tau}")
        if self.heads < 1:
            raise UsageError(f"heads must be >= 1, got {self.heads}")
        if self.metric_steps < 0 or self.gae_steps < 0:
            raise UsageError("step counts must be non-negative")
        if self.decoder not in ("selfrep", "inner"):
            raise UsageError(f"unknown decoder {self.decoder!r}")
        if self.score_cut not in ("otsu", "none"):
            raise UsageError(f"unknown score cut {self.score_cut!r}")
        if self.anchor not in ("running", "seed"):
            raise UsageError(f"unknown anchor {self.anchor!r}")
        if self.rec_mode not in ("frobenius", "bce"):
            raise UsageError(f"unknown reconstruction mode {self.rec_mode!r}")
        if len(self.loss_weights) != 3:
            raise UsageError("loss_weights needs three values")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss_weights"] = list(self.loss_weights)
        return d


@dataclass
class IterationRecord:
    iteration: int
    losses: dict
    consistency: float
    edges: int
    metrics: dict | None = None


@dataclass
class AttackTrace:
    tau: float = 0.0
    seed_edges: int = 0
    records: list = field(default_factory=list)
    stopped_early: bool = False

    def __len__(self):
        return len(self.records)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "seed_edges": self.seed_edges,
                "stopped_early": self.stopped_early,
                "iterations": [asdict(r) for r in self.records]}


class AttackAborted(NumericError):
    """A run failed mid-loop; ``trace`` holds the iterations completed so far."""

    def __init__(self, message, trace: AttackTrace):
        super().__init__(message)
        self.trace = trace


# -- elementwise steps -------------------------------------------------------


def combine(a0, at1, eta: float) -> np.ndarray:
    """``(1 - eta) * a0 + eta * at1``."""
    if not 0 < eta <= 1:
        raise UsageError(f"eta must lie in (0, 1], got {eta}")
    a0 = a0.to_dense() if isinstance(a0, Graph) else np.asarray(a0, dtype=np.float64)
    at1 = at1.to_dense() if isinstance(at1, Graph) else np.asarray(at1, dtype=np.float64)
    if a0.shape != at1.shape:
        raise UsageError(f"shape mismatch {a0.shape} vs {at1.shape}")
    if eta == 1:
        return at1.copy()
    return (1.0 - eta) * a0 + eta * at1


def clip(a) -> np.ndarray:
    return np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0)


def binarize_bernoulli(a, seed) -> Graph:
    """One Bernoulli draw per unordered pair ``v < u`` with probability ``a[v, u]``."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise UsageError(f"need a square matrix, got {a.shape}")
    iu, ju = np.triu_indices(n, 1)
    p = a[iu, ju]
    if p.size and (p.min() < 0 or p.max() > 1 or not np.isfinite(p).all()):
        raise ValidationError("edge probabilities must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keep = rng.random(p.size) < p
    return Graph.from_edges(n, np.stack([iu[keep], ju[keep]], axis=1))


def check_adjacency(a, where: str) -> None:
    """Raise if ``a`` is not symmetric with an all-zero diagonal."""
    m = a.to_dense() if isinstance(a, Graph) else np.asarray(a)
    if not np.array_equal(m, m.T):
        raise ValidationError(f"{where}: adjacency is not symmetric")
    if np.any(np.diag(m) != 0):
        raise ValidationError(f"{where}: adjacency has a non-zero diagonal")


# -- temperature and structure decoding ---------------------------------------


def auto_temperature(phi: np.ndarray, k: int) -> float:
    """Temperature making a typical k-th nearest pair ``n**3`` times likelier than a median pair.

    ``phi`` is a distance matrix. With ``tau = 1`` and cosine distances in
    ``[0, 2]`` all pairs get nearly the same probability, so the sampled
    graph is close to uniform; this rescales by the observed gap instead.
    """
    n = phi.shape[0]
    d = phi + np.diag(np.full(n, np.inf))
    srt = np.sort(d, axis=1)
    gap = np.median(srt[:, (n - 1) // 2] - srt[:, k - 1])
    if not gap > 0:
        return 1.0
    return float(3.0 * np.log(n) / gap)


def self_representation(h: np.ndarray, dictionary: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Non-negative coefficients ``C`` with ``h[v] ~ sum_u C[v, u] dictionary[u]``.

    Only ``candidates[v]`` (boolean row, diagonal ignored) may be used for row ``v``.
    """
    n = h.shape[0]
    c = np.zeros((n, n))
    for v in range(n):
        row = candidates[v].copy()
        row[v] = False
        idx = np.flatnonzero(row)
        if idx.size == 0:
            continue
        coef, _ = nnls(dictionary[idx].T, h[v])
        c[v, idx] = coef
    return c


def score_cut(scores: np.ndarray) -> float:
    """Otsu threshold on the log of the positive pair scores, 0 if it is undefined.

    Self-representation coefficients fall into small spurious atoms and
    large genuine neighbours; the cut separates the two groups without
    reference to ``k``.
    """
    n = scores.shape[0]
    vals = scores[np.triu_indices(n, 1)]
    pos = vals[vals > 0]
    if pos.size < 2 or pos.min() == pos.max():
        return 0.0
    logs = np.log(pos)
    nbins = 256
    # threshold_otsu reports the centre of the last lower-class bin; the
    # partition itself ends at that bin's upper edge
    t = threshold_otsu(logs, nbins=nbins) + 0.5 * (logs.max() - logs.min()) / nbins
    return float(np.exp(t))


def budget_scale(scores: np.ndarray, budget: int, cut: float = 0.0) -> np.ndarray:
    """Map symmetric non-negative scores to ``[0, 1]`` so the ``budget`` best pairs reach 1.

    Scores below ``cut`` are set to 0.
    """
    n = scores.shape[0]
    iu, ju = np.triu_indices(n, 1)
    vals = scores[iu, ju]
    budget = min(max(int(budget), 1), vals.size)
    ref = np.partition(vals, vals.size - budget)[vals.size - budget]
    if ref <= 0:
        pos = vals[vals > 0]
        ref = pos.min() if pos.size else 1.0
    out = np.minimum(scores / ref, 1.0)
    out[scores < cut] = 0.0
    np.fill_diagonal(out, 0.0)
    return out


def _consistency(ah, theta, target):
    r = ah @ theta - target
    return 0.5 * float((r * r).sum()), r


def _train_theta(params, opt, cfg, graph, h_t, h0, d2, steps):
    """``steps`` Adam updates of the encoder weight; returns params, loss terms, consistency."""
    a_hat = normalize_adjacency(graph)
    terms, cons = None, 0.0
    for _ in range(max(steps, 1)):
        terms, g_theta, _, fw = total_loss_and_gradients(
            params, graph, h_t, h0, cfg.alpha, cfg.beta, cfg.loss_weights, cfg.rec_mode,
            d2=d2, a_hat=a_hat)
        if cfg.consistency_weight:
            cons, r = _consistency(fw.ah, params.theta, h0)
            g_theta = g_theta + cfg.consistency_weight * (fw.ah.T @ r)
        if steps == 0 or cfg.freeze_theta:
            break
        params = optimize_step(params, g_theta, opt)
    return params, terms, cons, a_hat


def _structure(cfg, params, graph, h_t, h0, candidates, budget, a_hat):
    if cfg.decoder == "inner":
        return decode(a_hat @ h_t @ params.theta)
    coef = self_representation(h0, h0 @ params.theta, candidates)
    scores = coef + coef.T
    cut = score_cut(scores) if cfg.score_cut == "otsu" else 0.0
    return budget_scale(scores, budget, cut)


# -- drivers ----------------------------------------------------------------


def _prepare(h0, cfg):
    h = h0.data if isinstance(h0, EmbeddingMatrix) else np.asarray(h0, dtype=np.float64)
    if h.ndim != 2:
        raise UsageError("embeddings must be an n x d matrix")
    cfg.validate(h.shape[0])
    n, d = h.shape
    rng = np.random.default_rng(cfg.seed)
    phi0 = pairwise_distance(h)
    tau = auto_temperature(phi0, cfg.k) if cfg.tau is None else float(cfg.tau)
    probs = edge_probabilities(h, None, tau)
    a0 = gumbel_topk_graph(probs, cfg.k, rng)
    params = GaeParams.init(d, cfg.latent_dim or d, rng)
    return h, n, rng, tau, a0, params, probs


def _metrics(truth, g):
    if truth is None:
        return None
    p, r, f1 = edge_prf(truth, g)
    return {"precision": p, "recall": r, "f1": f1}


def run_attack(h0, cfg: AttackConfig, truth: Graph = None, hook=None):
    """Recover a graph from ``h0``; returns ``(Graph, AttackTrace)``.

    ``truth`` adds per-iteration precision/recall/F1 to the trace (evaluation
    only; it never influences the run). ``hook(stage, matrix)`` is called
    with every intermediate adjacency.
    """
    h, n, rng, tau, a0, params, probs = _prepare(h0, cfg)
    if cfg.latent_dim not in (None, h.shape[1]):
        raise UsageError("the loop feeds the latent back in, so latent_dim must equal d")
    trace = AttackTrace(tau=tau, seed_edges=a0.num_edges)
    hook = hook or (lambda stage, m: None)
    hook("seed", a0)
    opt = Adam(cfg.lr)
    heads = MetricHeads.ones(cfg.heads, h.shape[1])
    d2 = pairwise_sq_distances(h)
    budget = edge_budget(cfg.k, n)
    anchor = a0.to_dense()
    a_t, h_t = a0, h
    best, stale = np.inf, 0
    for t in range(cfg.iters):
        try:
            if a_t.num_edges == 0:
                raise NumericError("graph became empty")
            heads = fit_metric(heads, h_t, a_t, cfg.metric_steps, cfg.metric_lr,
                               cfg.neg_ratio, rng, tau)
            g_t = gumbel_topk_graph(edge_probabilities(h_t, heads, tau), cfg.k, rng)
            hook("resampled", g_t)
            params, terms, cons, a_hat = _train_theta(params, opt, cfg, g_t, h, h, d2,
                                                      cfg.gae_steps)
            cand = (g_t.to_dense() + a_t.to_dense()) > 0
            w = _structure(cfg, params, g_t, h, h, cand, budget, a_hat)
            hook("decoded", w)
            if cfg.feed_latent:
                h_t = a_hat @ h @ params.theta
            if not np.isfinite(h_t).all():
                raise NumericError("non-finite latent embedding")
            mixed = clip(combine(anchor, w, cfg.eta))
            hook("combined", mixed)
            if cfg.anchor == "running":
                anchor = mixed
            a_t = binarize_bernoulli(mixed, rng)
            hook("sampled", a_t)
        except GraphRecoverError as exc:
            raise AttackAborted(f"iteration {t}: {exc}", trace) from exc
        total = terms.total + cfg.consistency_weight * cons
        trace.records.append(IterationRecord(t, terms.as_dict(), cons, a_t.num_edges,
                                             _metrics(truth, a_t)))
        if cfg.early_stop:
            stale = stale + 1 if best - total < 1e-6 else 0
            best = min(best, total)
            if stale >= 20:
                trace.stopped_early = True
                break
    return a_t, trace


def run_attack_ablation_no_gml(h0, cfg: AttackConfig, truth: Graph = None, hook=None):
    """Seed graph, one autoencoder pass, one combine/clip/sample; no metric learning."""
    h, n, rng, tau, a0, params, probs = _prepare(h0, cfg)
    trace = AttackTrace(tau=tau, seed_edges=a0.num_edges)
    hook = hook or (lambda stage, m: None)
    hook("seed", a0)
    try:
        params, terms, cons, a_hat = _train_theta(params, Adam(cfg.lr), cfg, a0, h, h,
                                                  pairwise_sq_distances(h), cfg.ablation_steps)
        # without metric learning the extra candidates come from the seed distribution
        cand = (a0.to_dense() + gumbel_topk_graph(probs, cfg.k, rng).to_dense()) > 0
        w = _structure(cfg, params, a0, h, h, cand, edge_budget(cfg.k, n), a_hat)
        hook("decoded", w)
        mixed = clip(combine(a0, w, cfg.eta))
        hook("combined", mixed)
        g = binarize_bernoulli(mixed, rng)
        hook("sampled", g)
    except GraphRecoverError as exc:
        raise AttackAborted(f"ablation: {exc}", trace) from exc
    trace.records.append(IterationRecord(0, terms.as_dict(), cons, g.num_edges, _metrics(truth, g)))
    return g, trace
