"""Graph recovery from node embeddings: attack, baselines, metrics and a noise defense."""

__version__ = "0.1.0"

from .attack import AttackConfig, run_attack, run_attack_ablation_no_gml
from .baselines import direct_recovery, knn_graph
from .degree import SamplerConfig, estimate_average_degree
from .embeddings import EmbeddingMatrix, rw_pmi_embedding, spectral_embedding
from .evaluation import evaluate
from .graph import Graph, load_edge_list, save_edge_list
from .synthetic import stochastic_block_model

__all__ = [
    "AttackConfig", "EmbeddingMatrix", "Graph", "SamplerConfig", "direct_recovery",
    "estimate_average_degree", "evaluate", "knn_graph", "load_edge_list", "run_attack",
    "run_attack_ablation_no_gml", "rw_pmi_embedding", "save_edge_list", "spectral_embedding",
    "stochastic_block_model",
]
