"""Fixed-weight message-passing inference.

Each layer is GraphSAGE-style mean aggregation with concatenation::

    h_v <- act(W @ [h_v || mean_{u in N(v)} h_u] + b)

``N(v)`` is the set of distinct undirected neighbours of ``v`` (self-loops
excluded); the mean over no neighbours is the zero vector.

All arithmetic is float32 and every reduction runs in a fixed order:
neighbour sums accumulate in ascending node id and the matrix product
accumulates one input column at a time. Nothing depends on which other rows
are present, so a node whose K-hop ball is intact gets bit-identical output
whether it is evaluated in a small packed subgraph or in the whole graph.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .provgraph import ProvenanceGraph

MODEL_MAGIC = b"PFGNN\0"
MODEL_VERSION = 1
_HEADER = struct.Struct("<6sHII")  # magic, version, K, activation code
ACTIVATIONS = ("relu", "tanh")


class ModelFormatError(ValueError):
    pass


@dataclass
class GnnModel:
    weights: list
    biases: list
    activation: str = "relu"

    def __post_init__(self):
        self.activation = self.activation.lower()
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        self.weights = [np.ascontiguousarray(w, dtype=np.float32) for w in self.weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float32) for b in self.biases]
        d_in = self.weights[0].shape[1] // 2
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or w.shape[1] != 2 * d_in:
                raise ValueError(
                    f"layer {layer}: weight shape {w.shape}, expected (d_out, {2 * d_in})"
                )
            if b.shape != (w.shape[0],):
                raise ValueError(f"layer {layer}: bias shape {b.shape}, expected ({w.shape[0]},)")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {layer}: non-finite parameters")
            d_in = w.shape[0]

    @property
    def k_layers(self) -> int:
        return len(self.weights)

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[1] // 2] + [w.shape[0] for w in self.weights]

    def __eq__(self, other):
        if not isinstance(other, GnnModel):
            return NotImplemented
        return (
            self.activation == other.activation
            and self.dims == other.dims
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


def random_model(dims: Sequence[int], seed: int = 0, activation: str = "relu") -> GnnModel:
    """Seeded model with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) parameters."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(2 * d_in)
        weights.append(rng.uniform(-bound, bound, size=(d_out, 2 * d_in)).astype(np.float32))
        biases.append(rng.uniform(-bound, bound, size=d_out).astype(np.float32))
    return GnnModel(weights, biases, activation)


def save_model(model: GnnModel, path: Union[str, Path]) -> None:
    dims = model.dims
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, model.k_layers, ACTIVATIONS.index(model.activation)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        for w, b in zip(model.weights, model.biases):
            fh.write(w.astype("<f4").tobytes(order="C"))
            fh.write(b.astype("<f4").tobytes())


def load_model(path: Union[str, Path]) -> GnnModel:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ModelFormatError(f"{path}: truncated header")
    magic, version, k, act = _HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    if k < 1 or act >= len(ACTIVATIONS):
        raise ModelFormatError(f"{path}: bad header (K={k}, activation={act})")
    off = _HEADER.size
    if len(raw) < off + 4 * (k + 1):
        raise ModelFormatError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{k + 1}I", raw, off)
    off += 4 * (k + 1)
    expected = off + 4 * sum(o * 2 * i + o for i, o in zip(dims[:-1], dims[1:]))
    if len(raw) != expected:
        raise ModelFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        n = d_out * 2 * d_in
        weights.append(np.frombuffer(raw, "<f4", n, off).reshape(d_out, 2 * d_in).astype(np.float32))
        off += 4 * n
        biases.append(np.frombuffer(raw, "<f4", d_out, off).astype(np.float32))
        off += 4 * d_out
    try:
        return GnnModel(weights, biases, ACTIVATIONS[act])
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None


# -- forward pass ------------------------------------------------------------

@dataclass(frozen=True)
class _Adjacency:
    indptr: np.ndarray
    indices: np.ndarray
    degree: np.ndarray
    by_degree: np.ndarray  # node ids, degree descending (stable)
    sorted_degree: np.ndarray


def _adjacency(g: ProvenanceGraph) -> _Adjacency:
    a = g.undirected_csr().tolil()
    a.setdiag(0)
    a = a.tocsr()
    a.eliminate_zeros()
    a.sort_indices()
    indptr = a.indptr.astype(np.int64)
    degree = np.diff(indptr)
    by_degree = np.argsort(-degree, kind="stable")
    return _Adjacency(indptr, a.indices.astype(np.int64), degree, by_degree, degree[by_degree])


def _neighbor_mean(h: np.ndarray, adj: _Adjacency) -> np.ndarray:
    acc = np.zeros_like(h)
    max_deg = int(adj.sorted_degree[0]) if adj.sorted_degree.size else 0
    for r in range(max_deg):
        # nodes with more than r neighbours form a prefix of by_degree
        cnt = int(np.searchsorted(-adj.sorted_degree, -r, side="left"))
        nodes = adj.by_degree[:cnt]
        acc[nodes] += h[adj.indices[adj.indptr[nodes] + r]]
    has = adj.degree > 0
    acc[has] /= adj.degree[has].astype(np.float32)[:, None]
    return acc


def _linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.broadcast_to(b, (x.shape[0], b.shape[0])).copy()
    for j in range(x.shape[1]):
        out += x[:, j : j + 1] * w[:, j]
    return out


def forward(subgraph: ProvenanceGraph, init, model: GnnModel) -> np.ndarray:
    """Final-layer embeddings for every node of ``subgraph``.

    ``init`` is an ``(n_nodes, d_in)`` array indexed by node id, or a mapping
    from node id to vector.
    """
    n = subgraph.n_nodes
    if isinstance(init, Mapping):
        missing = [v for v in range(n) if v not in init]
        if missing:
            raise KeyError(f"missing init vector for node {missing[0]}")
        h = np.vstack([init[v] for v in range(n)]) if n else np.zeros((0, model.dims[0]), np.float32)
    else:
        h = np.asarray(init)
    h = np.ascontiguousarray(h, dtype=np.float32)
    if h.ndim != 2 or h.shape[0] != n:
        raise ValueError(f"init must have shape ({n}, d_in), got {h.shape}")
    adj = _adjacency(subgraph)
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        d_in = w.shape[1] // 2
        if h.shape[1] != d_in:
            raise ValueError(f"layer {layer}: expected input dim {d_in}, got {h.shape[1]}")
        z = _linear(np.concatenate([h, _neighbor_mean(h, adj)], axis=1), w, b)
        h = np.maximum(z, np.float32(0)) if model.activation == "relu" else np.tanh(z)
    return h


@dataclass
class NodeEmbeddings:
    """Final embeddings keyed by node id (``ids`` ascending, rows aligned)."""

    ids: np.ndarray
    values: np.ndarray

    def __len__(self):
        return int(self.ids.size)

    def as_dict(self) -> dict:
        return {int(i): self.values[r] for r, i in enumerate(self.ids)}


def run_inference_stage(bins, init: np.ndarray, model: GnnModel) -> NodeEmbeddings:
    """Forward each materialised bin; keep outputs only for the seeds it owns.

    ``init`` rows are indexed by ids of the graph the bins were cut from.
    """
    init = np.asarray(init, dtype=np.float32)
    ids, rows = [], []
    for b in bins:
        parent = b.subgraph.parent_ids
        if parent.size and parent.max() >= init.shape[0]:
            raise KeyError(f"bin {b.index}: missing init vector for node {int(parent.max())}")
        out = forward(b.subgraph, init[parent], model)
        ids.append(b.seeds)
        rows.append(out[b.local_seeds])
    if not ids:
        return NodeEmbeddings(np.zeros(0, np.int64), np.zeros((0, model.dims[-1]), np.float32))
    ids = np.concatenate(ids)
    rows = np.concatenate(rows)
    order = np.argsort(ids, kind="stable")
    ids = ids[order]
    if np.unique(ids).size != ids.size:
        raise ValueError("a seed node was assigned to more than one bin")
    return NodeEmbeddings(ids, rows[order])
