"""Laplace noise on released embeddings and the utility/attack trade-off."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .attack import AttackConfig, run_attack
from .baselines import _rank_pairs, cosine_similarity_matrix
from .embeddings import EmbeddingMatrix
from .errors import UsageError
from .evaluation import edge_prf
from .graph import Graph


@dataclass(frozen=True)
class NoiseConfig:
    b: float
    mu: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.b > 0:
            raise UsageError(f"Laplace scale must be positive, got {self.b}")


def laplace_noise(shape, mu: float, b: float, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF Laplace draws ``mu - b * sgn(U - 1/2) * ln(1 - 2|U - 1/2|)``."""
    u = rng.random(shape) - 0.5
    return mu - b * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def perturb_embeddings(h: EmbeddingMatrix, cfg: NoiseConfig) -> EmbeddingMatrix:
    """Add i.i.d. Laplace(mu, b) noise to every entry."""
    rng = np.random.default_rng(cfg.seed)
    return EmbeddingMatrix(h.data + laplace_noise(h.data.shape, cfg.mu, cfg.b, rng))


def link_prediction_precision(h, g_o: Graph) -> float:
    """Fraction of true edges among the ``|E_O|`` most cosine-similar pairs."""
    if g_o.num_edges < 1:
        raise UsageError("utility needs a graph with at least one edge")
    s = cosine_similarity_matrix(h)
    n = s.shape[0]
    if n != g_o.n:
        raise UsageError(f"embedding has {n} rows but graph has {g_o.n} nodes")
    iu, ju = np.triu_indices(n, 1)
    top = _rank_pairs(s[iu, ju], iu, ju)[: g_o.num_edges]
    pred = Graph.from_edges(n, np.stack([iu[top], ju[top]], axis=1))
    return edge_prf(g_o, pred)[0]


@dataclass
class TradeoffRow:
    b: float
    utility: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return asdict(self)


def tradeoff_sweep(h: EmbeddingMatrix, g_o: Graph, b_values, attack_cfg: AttackConfig,
                   noise_seed: int = 0, mu: float = 0.0, attack=run_attack) -> list:
    """For each ``b`` perturb ``h``, measure utility and run the attack on the noisy embedding.

    ``b = 0`` means no noise. Every row uses the same noise seed and the same
    attack configuration.
    """
    rows = []
    for b in b_values:
        b = float(b)
        if b < 0:
            raise UsageError(f"noise scale must be non-negative, got {b}")
        hn = h if b == 0 else perturb_embeddings(h, NoiseConfig(b, mu, noise_seed))
        g_r, _ = attack(hn, replace(attack_cfg))
        p, r, f1 = edge_prf(g_o, g_r)
        rows.append(TradeoffRow(b, link_prediction_precision(hn, g_o), p, r, f1))
    return rows
