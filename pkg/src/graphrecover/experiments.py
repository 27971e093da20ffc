"""Seeded synthetic experiment harness shared by the CLI and the acceptance tests."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .attack import AttackConfig, run_attack, run_attack_ablation_no_gml
from .baselines import direct_recovery, knn_graph
from .defense import NoiseConfig, link_prediction_precision, perturb_embeddings
from .degree import SamplerConfig, estimate_average_degree
from .embeddings import rw_pmi_embedding, spectral_embedding
from .evaluation import evaluate
from .graph import Graph
from .synthetic import stochastic_block_model

METHODS = ("attack", "ablation", "knn", "direct")
REFERENCE_SEED_OFFSET = 1_000_003


@dataclass(frozen=True)
class SbmSpec:
    sizes: tuple = (150, 150)
    p_in: float = 0.08
    p_out: float = 0.005

    def sample(self, seed: int) -> Graph:
        return stochastic_block_model(list(self.sizes), self.p_in, self.p_out, seed=seed)


def embed(g: Graph, method: str, d: int, seed: int):
    if method == "spectral":
        return spectral_embedding(g, d, seed=seed)
    if method == "rwpmi":
        return rw_pmi_embedding(g, d, seed=seed)
    raise ValueError(f"unknown embedding method {method!r}")


def estimate_k_from_generator(spec: SbmSpec, seed: int, n_refs: int = 3,
                              sampler: SamplerConfig = None):
    """Estimate the degree from ``n_refs`` fresh draws of the same generator (never the target)."""
    refs = [spec.sample(REFERENCE_SEED_OFFSET + seed * n_refs + i) for i in range(n_refs)]
    sampler = sampler or SamplerConfig(repetitions=100, seed=seed)
    return estimate_average_degree(refs, sampler)


def run_methods(g: Graph, h, k: int, seed: int, methods=METHODS, attack_cfg: AttackConfig = None):
    """Recovered graph per method, all with the same ``k`` and seed."""
    cfg = replace(attack_cfg or AttackConfig(k=k), k=k, seed=seed)
    out = {}
    for name in methods:
        if name == "attack":
            out[name] = run_attack(h, cfg)[0]
        elif name == "ablation":
            out[name] = run_attack_ablation_no_gml(h, cfg)[0]
        elif name == "knn":
            out[name] = knn_graph(h, k)
        elif name == "direct":
            out[name] = direct_recovery(h, k)
        else:
            raise ValueError(f"unknown method {name!r}")
    return out


def run_seed(g: Graph, seed: int, k: int, embedding: str = "spectral", dim: int = 32,
             noise_b: float = 0.0, methods=METHODS, attack_cfg: AttackConfig = None) -> dict:
    """Embed, optionally perturb, recover with every method and evaluate."""
    h = embed(g, embedding, dim, seed)
    if noise_b > 0:
        h = perturb_embeddings(h, NoiseConfig(noise_b, 0.0, seed))
    graphs = run_methods(g, h, k, seed, methods, attack_cfg)
    return {
        "seed": seed,
        "k": k,
        "nodes": g.n,
        "edges": g.num_edges,
        "utility": link_prediction_precision(h, g),
        "methods": {name: evaluate(g, gr).to_dict() for name, gr in graphs.items()},
    }


def summarize(values) -> dict:
    """Mean and population standard deviation; ``None`` entries are skipped."""
    vals = np.array([v for v in values if v is not None], dtype=np.float64)
    if vals.size == 0:
        return {"mean": None, "std": None, "count": 0}
    return {"mean": float(vals.mean()), "std": float(vals.std()), "count": int(vals.size)}


def median(values) -> float:
    return float(np.median(np.asarray(values, dtype=np.float64)))
