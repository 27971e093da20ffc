"""Linear graph autoencoder, its three self-supervised losses and an Adam optimiser.

All gradients are analytic. Weighted adjacencies are dense ``n x n`` arrays;
loss gradients are taken with respect to every entry independently.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import NumericError, UsageError
from .graph import Graph

CLAMP_EPS = 1e-7


@dataclass(frozen=True, eq=False)
class GaeParams:
    """Weight ``theta`` (``d x d'``) of the single linear graph-convolution layer."""

    theta: np.ndarray

    @classmethod
    def init(cls, d: int, latent_dim: int = None, seed=0) -> "GaeParams":
        latent_dim = d if latent_dim is None else latent_dim
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        bound = np.sqrt(6.0 / (d + latent_dim))
        return cls(rng.uniform(-bound, bound, size=(d, latent_dim)))

    @property
    def latent_dim(self) -> int:
        return self.theta.shape[1]


def _dense(a) -> np.ndarray:
    if isinstance(a, Graph):
        return a.to_dense()
    return np.asarray(a, dtype=np.float64)


def normalize_adjacency(a) -> np.ndarray:
    """GCN propagation matrix ``D^{-1/2} (A + I) D^{-1/2}``, ``D = rowsum(A + I)``."""
    at = _dense(a) + np.eye(a.n if isinstance(a, Graph) else len(a))
    dinv = 1.0 / np.sqrt(at.sum(axis=1))
    return at * dinv[:, None] * dinv[None, :]


def encode(a, h, params: GaeParams, a_hat: np.ndarray = None) -> np.ndarray:
    """Linear one-layer GCN: ``A_hat @ H @ theta``."""
    h = np.asarray(getattr(h, "data", h), dtype=np.float64)
    n = a.n if isinstance(a, Graph) else len(a)
    if h.shape[0] != n:
        raise UsageError(f"embedding has {h.shape[0]} rows but graph has {n} nodes")
    if h.shape[1] != params.theta.shape[0]:
        raise UsageError(f"embedding dimension {h.shape[1]} does not match theta {params.theta.shape}")
    if a_hat is None:
        a_hat = normalize_adjacency(a)
    return a_hat @ h @ params.theta


def decode(z: np.ndarray) -> np.ndarray:
    """Inner-product decoder ``sigmoid(Z Z^T)`` with the diagonal zeroed."""
    s = z @ z.T
    out = expit((s + s.T) / 2.0)
    np.fill_diagonal(out, 0.0)
    return out


def pairwise_sq_distances(h) -> np.ndarray:
    h = np.asarray(getattr(h, "data", h), dtype=np.float64)
    sq = (h * h).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (h @ h.T)
    d2 = np.maximum((d2 + d2.T) / 2.0, 0.0)
    np.fill_diagonal(d2, 0.0)
    return d2


# -- losses ----------------------------------------------------------------


def loss_laplacian(a_w, h0, d2: np.ndarray = None) -> float:
    """Smoothness ``(1 / 2n^2) sum_vu A_vu ||h_v - h_u||^2`` of ``h0`` over ``a_w``."""
    a_w = np.asarray(a_w, dtype=np.float64)
    n = a_w.shape[0]
    if d2 is None:
        d2 = pairwise_sq_distances(h0)
    return float((a_w * d2).sum() / (2.0 * n * n))


def laplacian_trace_form(a_w, h0) -> float:
    """``tr(H^T L H) / n^2`` with ``L = D - A``; equals :func:`loss_laplacian` for symmetric ``a_w``."""
    a_w = np.asarray(a_w, dtype=np.float64)
    h = np.asarray(getattr(h0, "data", h0), dtype=np.float64)
    lap = np.diag(a_w.sum(axis=1)) - a_w
    return float(np.trace(h.T @ lap @ h) / a_w.shape[0] ** 2)


def grad_laplacian(a_w, h0, d2: np.ndarray = None) -> np.ndarray:
    n = np.asarray(a_w).shape[0]
    if d2 is None:
        d2 = pairwise_sq_distances(h0)
    return d2 / (2.0 * n * n)


def _row_sums_checked(a_w):
    r = a_w.sum(axis=1)
    bad = np.flatnonzero(r <= 0)
    if bad.size:
        raise NumericError(f"log-degree barrier undefined: node {int(bad[0])} has row sum {r[bad[0]]:g}")
    return r


def loss_sparsity(a_w, alpha: float, beta: float) -> float:
    """``-alpha * 1^T log(A 1) + beta / 2 * ||A||_F^2``."""
    a_w = np.asarray(a_w, dtype=np.float64)
    r = _row_sums_checked(a_w)
    return float(-alpha * np.log(r).sum() + 0.5 * beta * (a_w * a_w).sum())


def grad_sparsity(a_w, alpha: float, beta: float) -> np.ndarray:
    a_w = np.asarray(a_w, dtype=np.float64)
    r = _row_sums_checked(a_w)
    return -alpha / r[:, None] + beta * a_w


def _bce_matrix(a_w, a_prev, eps):
    q = np.clip(a_w, eps, 1.0 - eps)
    return a_prev * np.log(q) + (1.0 - a_prev) * np.log1p(-q), q


def loss_reconstruction(a_w, a_prev, mode: str = "frobenius", eps: float = CLAMP_EPS) -> float:
    """Reconstruction of ``a_prev`` by ``a_w``.

    ``mode='frobenius'`` (default) is ``(1/2n^2) ||A_prev o log A + (1 - A_prev) o log(1 - A)||_F^2``;
    ``mode='bce'`` is the ordinary mean binary cross-entropy.
    """
    a_w = np.asarray(a_w, dtype=np.float64)
    a_prev = _dense(a_prev)
    n = a_w.shape[0]
    m, _ = _bce_matrix(a_w, a_prev, eps)
    if mode == "frobenius":
        return float((m * m).sum() / (2.0 * n * n))
    if mode == "bce":
        return float(-m.mean())
    raise UsageError(f"unknown reconstruction mode {mode!r}")


def grad_reconstruction(a_w, a_prev, mode: str = "frobenius", eps: float = CLAMP_EPS) -> np.ndarray:
    a_w = np.asarray(a_w, dtype=np.float64)
    a_prev = _dense(a_prev)
    n = a_w.shape[0]
    m, q = _bce_matrix(a_w, a_prev, eps)
    dm = a_prev / q - (1.0 - a_prev) / (1.0 - q)
    dm = np.where((a_w > eps) & (a_w < 1.0 - eps), dm, 0.0)
    if mode == "frobenius":
        return m * dm / (n * n)
    if mode == "bce":
        return -dm / (n * n)
    raise UsageError(f"unknown reconstruction mode {mode!r}")


# -- composed objective ------------------------------------------------------


@dataclass
class LossTerms:
    laplacian: float
    sparsity: float
    reconstruction: float
    total: float

    def as_dict(self) -> dict:
        return {"laplacian": self.laplacian, "sparsity": self.sparsity,
                "reconstruction": self.reconstruction, "total": self.total}


@dataclass
class GaeForward:
    """Cached forward pass: propagated features, latent and decoded adjacency."""

    a_hat: np.ndarray
    ah: np.ndarray
    z: np.ndarray
    a_w: np.ndarray


def forward(a_hat: np.ndarray, h, params: GaeParams) -> GaeForward:
    h = np.asarray(getattr(h, "data", h), dtype=np.float64)
    ah = a_hat @ h
    z = ah @ params.theta
    return GaeForward(a_hat, ah, z, decode(z))


def total_loss_and_gradients(params: GaeParams, a_t, h_t, h0, alpha: float = 0.3,
                             beta: float = 0.1, weights=(1.0, 1.0, 1.0),
                             rec_mode: str = "frobenius", d2: np.ndarray = None,
                             a_hat: np.ndarray = None):
    """Weighted sum of the three losses and its gradients.

    ``a_t`` is the input graph (binary), ``h_t`` the encoder features and
    ``h0`` the observed embedding used by the smoothness term. Returns
    ``(LossTerms, grad_theta, grad_h, forward)`` where ``grad_h`` is the
    gradient with respect to the encoder input features.
    """
    a_prev = _dense(a_t)
    if a_hat is None:
        a_hat = normalize_adjacency(a_prev)
    fw = forward(a_hat, h_t, params)
    if d2 is None:
        d2 = pairwise_sq_distances(h0)
    w_lap, w_spa, w_rec = weights

    terms = LossTerms(
        laplacian=loss_laplacian(fw.a_w, h0, d2=d2),
        sparsity=loss_sparsity(fw.a_w, alpha, beta),
        reconstruction=loss_reconstruction(fw.a_w, a_prev, rec_mode),
        total=0.0,
    )
    terms.total = w_lap * terms.laplacian + w_spa * terms.sparsity + w_rec * terms.reconstruction
    for name, val in terms.as_dict().items():
        if not np.isfinite(val):
            raise NumericError(f"non-finite {name} loss")

    g_a = (w_lap * grad_laplacian(fw.a_w, h0, d2=d2)
           + w_spa * grad_sparsity(fw.a_w, alpha, beta)
           + w_rec * grad_reconstruction(fw.a_w, a_prev, rec_mode))
    np.fill_diagonal(g_a, 0.0)  # diagonal of the decoder output is a constant
    g_s = g_a * fw.a_w * (1.0 - fw.a_w)
    g_z = (g_s + g_s.T) @ fw.z
    grad_theta = fw.ah.T @ g_z
    grad_h = a_hat.T @ g_z @ params.theta.T
    if not np.isfinite(grad_theta).all():
        raise NumericError("non-finite encoder gradient")
    return terms, grad_theta, grad_h, fw


# -- optimiser ---------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray = None
    v: np.ndarray = None
    t: int = 0


@dataclass
class Adam:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    state: AdamState = field(default_factory=AdamState)

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        s = self.state
        if s.m is None:
            s.m = np.zeros_like(params)
            s.v = np.zeros_like(params)
        s.t += 1
        s.m = self.beta1 * s.m + (1.0 - self.beta1) * grads
        s.v = self.beta2 * s.v + (1.0 - self.beta2) * grads * grads
        m_hat = s.m / (1.0 - self.beta1 ** s.t)
        v_hat = s.v / (1.0 - self.beta2 ** s.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def optimize_step(params: GaeParams, grad_theta: np.ndarray, optimizer: Adam) -> GaeParams:
    return GaeParams(optimizer.step(params.theta, grad_theta))
