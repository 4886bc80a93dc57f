"""Node-level featurization and length-aware execution units.

Attributes are embedded with signed character-trigram feature hashing
(64-bit FNV-1a per trigram, bucket ``h % d``, sign from bit 63), followed by
L2 normalisation. Embedding cost grows linearly with string length, so work
items are costed by length and packed first-fit-decreasing into execution
units whose total cost stays within a budget.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

EMB_MAGIC = b"PFEMB\0"
EMB_VERSION = 1
_EMB_HEADER = struct.Struct("<6sHII")  # magic, version, dim, count -> 16 bytes


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def trigrams(attr: str) -> list[str]:
    if len(attr) < 3:
        return [attr] if attr else []
    return [attr[i : i + 3] for i in range(len(attr) - 2)]


@lru_cache(maxsize=1 << 16)
def _embed_cached(attr: str, d: int) -> bytes:
    acc = np.zeros(d, dtype=np.float64)
    for gram in trigrams(attr):
        h = fnv1a_64(gram.encode("utf-8"))
        acc[h % d] += -1.0 if h >> 63 else 1.0
    norm = math.sqrt(float(np.dot(acc, acc)))
    if norm > 0:
        acc /= norm
    return acc.astype("<f4").tobytes()


def embed_attr(attr: str, d: int = 64) -> np.ndarray:
    """Deterministic unit-norm (or zero) float32 vector for one attribute string."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return np.frombuffer(_embed_cached(attr, d), dtype="<f4").astype(np.float32)


class TrigramHashEmbedder(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping attribute strings to hashed trigram vectors.

    Like ``HashingVectorizer``, ``fit`` learns nothing; it only validates
    parameters so the embedder composes with sklearn pipelines.

    Parameters
    ----------
    n_features : int, default=64
        Output dimension.
    """

    def __init__(self, n_features: int = 64):
        self.n_features = n_features

    def fit(self, X=None, y=None):
        if int(self.n_features) < 1:
            raise ValueError("n_features must be >= 1")
        return self

    def transform(self, X) -> np.ndarray:
        self.fit()
        if isinstance(X, str):
            raise ValueError("expected an iterable of strings, got a single string")
        rows = [embed_attr(str(a), self.n_features) for a in X]
        if not rows:
            return np.zeros((0, self.n_features), dtype=np.float32)
        return np.vstack(rows)

    def _more_tags(self):
        return {"stateless": True, "X_types": ["string"]}


# -- execution units -------------------------------------------------------

@dataclass(frozen=True)
class CostModel:
    """Embedding cost in abstract units: ``c0 + c1 * len(attr)``."""

    c0: float = 1.0
    c1: float = 0.01

    def __call__(self, length: int) -> float:
        return self.c0 + self.c1 * length


@dataclass(frozen=True)
class EmbedWorkItem:
    node: int
    attr: str
    est_cost: float

    @classmethod
    def for_node(cls, node: int, attr: str, cost_model: CostModel = CostModel()) -> "EmbedWorkItem":
        return cls(node, attr, cost_model(len(attr)))


@dataclass
class ExecutionUnit:
    unit_id: int
    items: list = field(default_factory=list)
    total_cost: float = 0.0
    oversize: bool = False
    vertical_scale: int = 1

    @property
    def cost(self) -> float:
        return self.total_cost


def pack_embedding_units(items: Iterable[EmbedWorkItem], unit_budget: float) -> list[ExecutionUnit]:
    """First-fit-decreasing grouping of work items into execution units.

    Items are sorted by cost descending (ties by node id). An item costing
    more than the budget gets a unit of its own, flagged ``oversize`` with a
    ``vertical_scale`` hint of ``ceil(cost / budget)``.
    """
    if unit_budget <= 0:
        raise ValueError("unit_budget must be positive")
    ordered = sorted(items, key=lambda it: (-it.est_cost, it.node))
    units: list[ExecutionUnit] = []
    open_units: list[ExecutionUnit] = []
    for it in ordered:
        if it.est_cost > unit_budget:
            units.append(
                ExecutionUnit(
                    len(units), [it], it.est_cost, True, math.ceil(it.est_cost / unit_budget)
                )
            )
            continue
        for u in open_units:
            if u.total_cost + it.est_cost <= unit_budget:
                u.items.append(it)
                u.total_cost += it.est_cost
                break
        else:
            u = ExecutionUnit(len(units), [it], it.est_cost)
            units.append(u)
            open_units.append(u)
    return units


@dataclass
class EmbeddingStageResult:
    vectors: dict
    units: list

    def matrix(self, ids: Iterable[int], d: int) -> np.ndarray:
        ids = list(ids)
        if not ids:
            return np.zeros((0, d), dtype=np.float32)
        return np.vstack([self.vectors[int(i)] for i in ids])


def run_embedding_stage(
    nodes: Union[Mapping[int, str], Iterable[tuple[int, str]]],
    unit_budget: float = 50.0,
    d: int = 64,
    cost_model: CostModel = CostModel(),
) -> EmbeddingStageResult:
    """Embed every ``(node, attr)`` pair, evaluating unit by unit.

    Units only decide scheduling; the resulting vectors are keyed by node id
    and do not depend on how items were grouped.
    """
    pairs = nodes.items() if isinstance(nodes, Mapping) else nodes
    items = [EmbedWorkItem.for_node(int(n), a, cost_model) for n, a in pairs]
    units = pack_embedding_units(items, unit_budget)
    vectors = {}
    for u in units:
        for it in u.items:
            vectors[it.node] = embed_attr(it.attr, d)
    return EmbeddingStageResult(dict(sorted(vectors.items())), units)


# -- PFEMB dump ------------------------------------------------------------

def save_embeddings(path: Union[str, Path], vectors: Mapping[int, np.ndarray], d: int | None = None) -> None:
    """Write ``(u64 id, d x f32)`` little-endian records behind a 16-byte header."""
    ids = sorted(int(k) for k in vectors)
    if d is None:
        d = len(vectors[ids[0]]) if ids else 0
    with open(path, "wb") as fh:
        fh.write(_EMB_HEADER.pack(EMB_MAGIC, EMB_VERSION, d, len(ids)))
        for i in ids:
            v = np.asarray(vectors[i], dtype="<f4")
            if v.shape != (d,):
                raise ValueError(f"vector for node {i} has shape {v.shape}, expected ({d},)")
            fh.write(struct.pack("<Q", i))
            fh.write(v.tobytes())


def load_embeddings(path: Union[str, Path]) -> dict:
    raw = Path(path).read_bytes()
    if len(raw) < _EMB_HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, d, count = _EMB_HEADER.unpack_from(raw)
    if magic != EMB_MAGIC or version != EMB_VERSION:
        raise ValueError(f"{path}: not a PFEMB v{EMB_VERSION} file")
    rec = 8 + 4 * d
    if len(raw) != _EMB_HEADER.size + count * rec:
        raise ValueError(f"{path}: expected {count} records of {rec} bytes")
    out = {}
    off = _EMB_HEADER.size
    for _ in range(count):
        (i,) = struct.unpack_from("<Q", raw, off)
        out[i] = np.frombuffer(raw, dtype="<f4", count=d, offset=off + 8).astype(np.float32)
        off += rec
    return out
