"""Average-degree estimation from reference graphs by exploration sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .graph import Graph


@dataclass(frozen=True)
class SamplerConfig:
    """Layered degree-biased exploration.

    ``gamma=0`` with an unlimited ``frontier_width`` is a breadth-first
    snowball sample. ``frontier_width=None`` means ``ceil(0.1 * n)``.
    """

    fraction: float = 0.3
    repetitions: int = 300
    gamma: float = 1.0
    frontier_width: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise UsageError(f"fraction must lie in (0, 1], got {self.fraction}")
        if self.repetitions < 1:
            raise UsageError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.gamma < 0:
            raise UsageError(f"gamma must be non-negative, got {self.gamma}")
        if self.frontier_width is not None and self.frontier_width < 1:
            raise UsageError(f"frontier_width must be >= 1, got {self.frontier_width}")


@dataclass(frozen=True)
class DegreeEstimate:
    mean: float
    std: float
    samples: int
    k_int: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "samples": self.samples, "k_int": self.k_int}


def _pick(frontier: np.ndarray, deg: np.ndarray, gamma: float, size: int, rng) -> np.ndarray:
    """``size`` frontier nodes without replacement, probability proportional to ``deg**gamma``."""
    if size >= frontier.size:
        return frontier
    w = np.power(deg[frontier].astype(np.float64), gamma)
    u = rng.random(frontier.size)
    with np.errstate(divide="ignore"):
        keys = np.log(w) - np.log(-np.log(u))  # Gumbel-max keys
    # zero-weight nodes come last, in random order
    order = np.lexsort((u, -keys))
    return frontier[order[:size]]


def exploration_sample(g: Graph, cfg: SamplerConfig, seed: int) -> np.ndarray:
    """Sorted ids of the nodes expanded by one exploration run.

    Starts at a uniformly random node and restarts at a random unvisited
    node whenever the frontier runs dry before the target is reached.
    """
    n = g.n
    if n == 0:
        return np.empty(0, dtype=np.int64)
    rng = np.random.default_rng(seed)
    target = min(n, max(1, math.ceil(cfg.fraction * n - 1e-9)))
    width = cfg.frontier_width or math.ceil(0.1 * n)
    deg = g.degrees()
    adj = g.adjacency
    visited = np.zeros(n, dtype=bool)
    expanded = np.zeros(n, dtype=bool)
    frontier = []
    count = 0
    while count < target:
        if not frontier:
            start = rng.choice(np.flatnonzero(~visited))
            visited[start] = True
            frontier = [int(start)]
        chosen = _pick(np.array(frontier), deg, cfg.gamma, min(width, target - count), rng)
        expanded[chosen] = True
        count += chosen.size
        chosen_set = set(chosen.tolist())
        frontier = [v for v in frontier if v not in chosen_set]
        for v in chosen:
            for u in adj.indices[adj.indptr[v]:adj.indptr[v + 1]]:
                if not visited[u]:
                    visited[u] = True
                    frontier.append(int(u))
    return np.flatnonzero(expanded)


def estimate_average_degree(reference: list, cfg: SamplerConfig = SamplerConfig()) -> DegreeEstimate:
    """Mean and population std of the per-run average degree of expanded nodes.

    Every repetition of every reference graph counts once. Run ``r`` (counted
    across all graphs) uses seed ``cfg.seed + r``.
    """
    if not reference:
        raise UsageError("at least one reference graph is required")
    values = []
    r = 0
    for g in reference:
        deg = g.degrees()
        for _ in range(cfg.repetitions):
            nodes = exploration_sample(g, cfg, cfg.seed + r)
            values.append(float(deg[nodes].mean()) if nodes.size else 0.0)
            r += 1
    values = np.array(values)
    mean = float(values.mean())
    return DegreeEstimate(mean, float(values.std()), len(values), max(1, int(round(mean))))
