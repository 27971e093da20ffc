"""Node-embedding fixtures and embedding-matrix I/O.

The attack only ever sees an ``n x d`` matrix, so trained SkipGram/GCN models
are replaced here by two closed-form factorisation fixtures that keep
connected nodes close in cosine terms.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .eigen import top_eigenpairs, top_magnitude_eigenpairs
from .errors import FormatError, UsageError, ValidationError
from .graph import Graph

MAGIC = b"NEMB"
VERSION = 1
_HEADER = struct.Struct("<4sIQQI")


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """Row ``v`` of ``data`` is the embedding of node ``v``."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] < 1 or arr.shape[0] < 1:
            raise ValidationError(f"embedding matrix must be n x d with n, d >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            bad = int(np.argwhere(~np.isfinite(arr))[0, 0])
            raise ValidationError(f"non-finite embedding entry in row {bad}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return self.normalized == other.normalized and np.array_equal(self.data, other.data)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def normalized_adjacency(g: Graph) -> sp.csr_matrix:
    """``D^{-1/2} (A + I) D^{-1/2}`` with ``D`` the row sums of ``A + I`` (sparse)."""
    a = g.adjacency.astype(np.float64) + sp.identity(g.n, format="csr")
    dinv = 1.0 / np.sqrt(np.asarray(a.sum(axis=1)).ravel())
    return sp.csr_matrix(sp.diags(dinv) @ a @ sp.diags(dinv))


def spectral_embedding(g: Graph, d: int, seed: int = 0, tol: float = 1e-8) -> EmbeddingMatrix:
    """Top-``d`` eigenvectors of the self-loop-augmented normalised adjacency.

    Each eigenvector's sign is chosen so that its largest-magnitude entry is
    positive.
    """
    if not 1 <= d < g.n:
        raise UsageError(f"embedding dimension must satisfy 1 <= d < n, got d={d}, n={g.n}")
    _, vecs = top_eigenpairs(normalized_adjacency(g), d, seed=seed, tol=tol)
    return EmbeddingMatrix(_fix_signs(vecs))


def random_walks(g: Graph, walks_per_node: int, walk_length: int, seed: int) -> np.ndarray:
    """Uniform random walks, ``walks_per_node`` from every node, ``walk_length`` steps each.

    Returns an int array of shape ``(n * walks_per_node, walk_length + 1)``.
    A walk that reaches an isolated node stays there.
    """
    rng = np.random.default_rng(seed)
    adj = g.adjacency
    indptr, indices = adj.indptr, adj.indices
    deg = np.diff(indptr)
    starts = np.tile(np.arange(g.n), walks_per_node)
    walks = np.empty((starts.size, walk_length + 1), dtype=np.int64)
    walks[:, 0] = starts
    cur = starts
    for step in range(1, walk_length + 1):
        dc = deg[cur]
        offs = np.floor(rng.random(cur.size) * np.maximum(dc, 1)).astype(np.int64)
        nxt = np.where(dc > 0, indices[np.minimum(indptr[cur] + offs, len(indices) - 1)], cur)
        walks[:, step] = nxt
        cur = nxt
    return walks


def cooccurrence_matrix(walks: np.ndarray, n: int, window: int) -> np.ndarray:
    """Symmetric counts of distinct node pairs appearing within ``window`` steps on a walk.

    A node paired with itself (a revisit, or a walk stuck on an isolated
    node) is not counted.
    """
    c = np.zeros((n, n))
    length = walks.shape[1]
    for off in range(1, min(window, length - 1) + 1):
        a, b = walks[:, :-off].ravel(), walks[:, off:].ravel()
        keep = a != b
        a, b = a[keep], b[keep]
        np.add.at(c, (a, b), 1.0)
        np.add.at(c, (b, a), 1.0)
    return c


def ppmi(c: np.ndarray) -> np.ndarray:
    total = c.sum()
    row = c.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        pmi = np.log(c * total / np.outer(row, row))
    pmi[~np.isfinite(pmi)] = 0.0
    return np.maximum(pmi, 0.0)


def rw_pmi_embedding(g: Graph, d: int, walks_per_node: int = 10, walk_length: int = 40,
                     window: int = 5, seed: int = 0) -> EmbeddingMatrix:
    """Random-walk PPMI factorisation, a closed-form stand-in for SkipGram models.

    Rows are ``U |Lambda|^{1/2}`` for the rank-``d`` truncated
    eigendecomposition (largest magnitudes) of the PPMI matrix.
    """
    if not 1 <= d < g.n:
        raise UsageError(f"embedding dimension must satisfy 1 <= d < n, got d={d}, n={g.n}")
    walks = random_walks(g, walks_per_node, walk_length, seed)
    m = ppmi(cooccurrence_matrix(walks, g.n, window))
    vals, vecs = top_magnitude_eigenpairs(m, d, seed=seed, tol=1e-6, max_iter=2000)
    return EmbeddingMatrix(_fix_signs(vecs) * np.sqrt(np.abs(vals)))


def row_normalize(h: EmbeddingMatrix) -> EmbeddingMatrix:
    norms = np.linalg.norm(h.data, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValidationError(f"cannot normalise all-zero embedding of node {int(zero[0])}")
    return EmbeddingMatrix(h.data / norms[:, None], normalized=True)


def save_embeddings(h: EmbeddingMatrix, path, fmt: str = None) -> None:
    """Write ``h`` as binary (default) or text (``fmt='text'`` or a ``.txt`` path)."""
    fmt = fmt or ("text" if str(path).endswith(".txt") else "binary")
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, h.n, h.d, int(h.normalized)))
            fh.write(h.data.astype("<f8").tobytes(order="C"))
    elif fmt == "text":
        with open(path, "w") as fh:
            fh.write(f"{h.n} {h.d}\n")
            for row in h.data:
                fh.write(" ".join(format(x, ".17g") for x in row) + "\n")
    else:
        raise UsageError(f"unknown embedding format {fmt!r}")


def load_embeddings(path) -> EmbeddingMatrix:
    """Read either format; the binary form is recognised by its magic bytes."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] == MAGIC:
        if len(raw) < _HEADER.size:
            raise FormatError("truncated header")
        _, version, n, d, flags = _HEADER.unpack_from(raw)
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        body = raw[_HEADER.size:]
        if len(body) != 8 * n * d:
            raise FormatError(f"expected {8 * n * d} payload bytes for {n}x{d}, found {len(body)}")
        data = np.frombuffer(body, dtype="<f8").reshape(n, d).astype(np.float64)
        return EmbeddingMatrix(data, normalized=bool(flags & 1))
    try:
        lines = raw.decode("ascii").splitlines()
        n, d = (int(t) for t in lines[0].split())
        rows = [[float(t) for t in ln.split()] for ln in lines[1:] if ln.strip()]
    except (UnicodeDecodeError, ValueError, IndexError):
        raise FormatError("not a binary or text embedding file") from None
    if len(rows) != n or any(len(r) != d for r in rows):
        raise FormatError(f"text body does not match declared shape {n}x{d}")
    return EmbeddingMatrix(np.array(rows, dtype=np.float64).reshape(n, d))
