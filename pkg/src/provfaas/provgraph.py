"""Provenance graph construction and detection-relevant filtering.

The graph is a typed temporal multigraph: every log event becomes a directed
edge from subject to object. Entities receive dense ids in order of first
appearance, so node sets can be held as compact bitsets or boolean masks.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .events import EntityType, EventType, LogEvent

logger = logging.getLogger(__name__)

NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000


@dataclass(frozen=True)
class DetectionInterval:
    index: int
    start_ts: int
    end_ts: int

    def __post_init__(self):
        if self.end_ts <= self.start_ts:
            raise ValueError("interval end_ts must be greater than start_ts")


@dataclass(frozen=True)
class ActiveSnapshot:
    """Frozen view of the nodes touched during one detection interval."""

    interval: int
    active: frozenset
    version: int
    n_nodes: int
    n_edges: int


class ProvenanceGraph:
    """Evolving provenance multigraph with per-interval active-node tracking.

    Parameters
    ----------
    skew_window_ms : int, default=5000
        Events older than the newest timestamp seen minus this window are
        dropped (and counted in ``dropped_events``) instead of ingested.
    """

    def __init__(self, skew_window_ms: int = 5000):
        self.skew_window_ms = skew_window_ms
        self.node_keys: list[str] = []
        self.node_types: list[EntityType] = []
        self.node_attrs: list[str] = []
        self.key_to_id: dict[str, int] = {}
        self.edge_src: list[int] = []
        self.edge_dst: list[int] = []
        self.edge_types: list[EventType] = []
        self.edge_ts: list[int] = []
        # per-node edge ids, in ingestion (timestamp) order
        self.out_edges: list[list[int]] = []
        self.in_edges: list[list[int]] = []
        self.interval_active: set[int] = set()
        self.max_ts: int | None = None
        self.dropped_events = 0
        self.version = 0
        # set on graphs produced by induced_subgraph
        self.parent_ids: np.ndarray | None = None
        self.remap: dict[int, int] | None = None
        self._csr = None

    # -- construction -------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.node_keys)

    @property
    def n_edges(self) -> int:
        return len(self.edge_src)

    def __len__(self):
        return self.n_nodes

    def __contains__(self, node) -> bool:
        return isinstance(node, (int, np.integer)) and 0 <= node < self.n_nodes

    def add_node(self, key: str, etype: EntityType, attr: str) -> int:
        nid = self.key_to_id.get(key)
        if nid is None:
            nid = len(self.node_keys)
            self.key_to_id[key] = nid
            self.node_keys.append(key)
            self.node_types.append(etype)
            self.node_attrs.append(attr)
            self.out_edges.append([])
            self.in_edges.append([])
        return nid

    def add_edge(self, src: int, dst: int, etype: EventType, ts: int) -> int:
        eid = len(self.edge_src)
        self.edge_src.append(src)
        self.edge_dst.append(dst)
        self.edge_types.append(etype)
        self.edge_ts.append(ts)
        self.out_edges[src].append(eid)
        self.in_edges[dst].append(eid)
        self._csr = None
        self.version += 1
        return eid

    def ingest(self, e: LogEvent) -> bool:
        """Add one event; returns False if it was dropped as out of order."""
        skew_ns = self.skew_window_ms * NS_PER_MS
        if self.max_ts is not None and e.ts < self.max_ts - skew_ns:
            self.dropped_events += 1
            logger.warning(
                "dropping out-of-order event at ts=%d (newest seen %d)", e.ts, self.max_ts
            )
            return False
        if self.max_ts is None or e.ts > self.max_ts:
            self.max_ts = e.ts
        s = self.add_node(e.subject_key, e.subject_type, e.subject_attr)
        o = self.add_node(e.object_key, e.object_type, e.object_attr)
        self.add_edge(s, o, e.event_type, e.ts)
        self.interval_active.add(s)
        self.interval_active.add(o)
        return True

    def close_interval(self, iv: DetectionInterval | int = 0) -> ActiveSnapshot:
        """Freeze and reset the active set for the interval just finished."""
        index = iv.index if isinstance(iv, DetectionInterval) else int(iv)
        snap = ActiveSnapshot(
            interval=index,
            active=frozenset(self.interval_active),
            version=self.version,
            n_nodes=self.n_nodes,
            n_edges=self.n_edges,
        )
        self.interval_active = set()
        return snap

    @classmethod
    def from_edges(
        cls,
        n_nodes: int,
        edges: Iterable[tuple[int, int]],
        node_types: Sequence[EntityType] | None = None,
        node_attrs: Sequence[str] | None = None,
        edge_type: EventType = EventType.OTHER,
    ) -> "ProvenanceGraph":
        """Build a graph directly from dense ids (keys are ``"n<id>"``)."""
        g = cls()
        for v in range(n_nodes):
            g.add_node(
                f"n{v}",
                node_types[v] if node_types is not None else EntityType.PROCESS,
                node_attrs[v] if node_attrs is not None else "",
            )
        for ts, (s, d) in enumerate(edges):
            g.add_edge(int(s), int(d), edge_type, ts)
        return g

    # -- views ---------------------------------------------------------------
    def successors(self, v: int) -> list[tuple[int, EventType, int]]:
        return [(self.edge_dst[e], self.edge_types[e], self.edge_ts[e]) for e in self.out_edges[v]]

    def predecessors(self, v: int) -> list[tuple[int, EventType, int]]:
        return [(self.edge_src[e], self.edge_types[e], self.edge_ts[e]) for e in self.in_edges[v]]

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.asarray(self.edge_src, dtype=np.int64),
            np.asarray(self.edge_dst, dtype=np.int64),
        )

    def undirected_csr(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency (forward union reverse), duplicates collapsed.

        Column indices within each row are sorted ascending. Self-loops are
        kept on the diagonal.
        """
        if self._csr is None:
            n = self.n_nodes
            src, dst = self.edge_arrays()
            rows = np.concatenate([src, dst])
            cols = np.concatenate([dst, src])
            data = np.ones(rows.shape[0], dtype=np.int8)
            a = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
            a.sum_duplicates()
            a.data[:] = 1
            a.sort_indices()
            self._csr = a
        return self._csr

    def neighbors(self, v: int) -> np.ndarray:
        """Distinct undirected neighbours of ``v`` in ascending id order."""
        a = self.undirected_csr()
        return a.indices[a.indptr[v] : a.indptr[v + 1]]

    def edge_multiset(self) -> Counter:
        """Multiset of (subject key, event type, object key) triples."""
        return Counter(
            (self.node_keys[s], t, self.node_keys[d])
            for s, d, t in zip(self.edge_src, self.edge_dst, self.edge_types)
        )


def build_graph(events: Iterable[LogEvent], skew_window_ms: int = 5000) -> ProvenanceGraph:
    g = ProvenanceGraph(skew_window_ms=skew_window_ms)
    for e in events:
        g.ingest(e)
    return g


def _check_nodes(g: ProvenanceGraph, nodes: Iterable[int]) -> np.ndarray:
    arr = np.fromiter((int(v) for v in nodes), dtype=np.int64)
    bad = arr[(arr < 0) | (arr >= g.n_nodes)]
    if bad.size:
        raise KeyError(f"node {int(bad[0])} is not in the graph")
    return arr


def _hop_closure(g: ProvenanceGraph, seeds: np.ndarray, hops: int) -> frozenset:
    n = g.n_nodes
    reached = np.zeros(n, dtype=bool)
    if seeds.size == 0:
        return frozenset()
    reached[seeds] = True
    frontier = reached.copy()
    a = g.undirected_csr()
    for _ in range(hops):
        nxt = (a @ frontier.astype(np.int32)) > 0
        nxt &= ~reached
        if not nxt.any():
            break
        reached |= nxt
        frontier = nxt
    return frozenset(np.flatnonzero(reached).tolist())


def locality_filter(g: ProvenanceGraph, active: Iterable[int], k_layers: int) -> frozenset:
    """Nodes within ``2 * k_layers`` undirected hops of any active node."""
    if k_layers < 1:
        raise ValueError("k_layers must be a positive integer")
    return _hop_closure(g, _check_nodes(g, active), 2 * k_layers)


# -- frequency database ------------------------------------------------------

def first_token(attr: str) -> str:
    parts = attr.split(None, 1)
    return parts[0] if parts else ""


Signature = tuple  # (subject type name, event type name, object token)


@dataclass
class FrequencyDb:
    """Occurrence counts of edge signatures over a training stream.

    An edge is rare when its signature count is ``<= threshold``.
    """

    counts: dict = field(default_factory=dict)
    threshold: float = 10
    tokenizer: Callable[[str], str] = first_token

    def signature(self, subject_type: EntityType, event_type: EventType, object_attr: str) -> Signature:
        return (subject_type.value, event_type.value, self.tokenizer(object_attr))

    def event_signature(self, e: LogEvent) -> Signature:
        return self.signature(e.subject_type, e.event_type, e.object_attr)

    def count(self, sig: Signature) -> int:
        return self.counts.get(sig, 0)

    def is_rare(self, sig: Signature) -> bool:
        return self.count(sig) <= self.threshold

    def save(self, path: Union[str, Path]) -> None:
        lines = [f"#threshold={self.threshold!r}\n"]
        for sig in sorted(self.counts):
            lines.append(f"{' '.join(sig)}\t{self.counts[sig]}\n")
        Path(path).write_text("".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "FrequencyDb":
        text = Path(path).read_text(encoding="utf-8").splitlines()
        if not text or not text[0].startswith("#threshold="):
            raise ValueError(f"{path}: missing '#threshold=' header")
        threshold = float(text[0].split("=", 1)[1])
        if threshold.is_integer():
            threshold = int(threshold)
        counts = {}
        for lineno, line in enumerate(text[1:], start=2):
            if not line:
                continue
            try:
                sig, cnt = line.rsplit("\t", 1)
                subj, ev, tok = sig.split(" ", 2)
                counts[(subj, ev, tok)] = int(cnt)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed frequency record") from None
        return cls(counts=counts, threshold=threshold)


def build_frequency_db(
    training_events: Iterable[LogEvent],
    threshold: float = 10,
    tokenizer: Callable[[str], str] = first_token,
) -> FrequencyDb:
    db = FrequencyDb(threshold=threshold, tokenizer=tokenizer)
    db.counts = dict(Counter(db.event_signature(e) for e in training_events))
    return db


def rare_edge_endpoints(g: ProvenanceGraph, db: FrequencyDb) -> set[int]:
    out = set()
    for s, d, t in zip(g.edge_src, g.edge_dst, g.edge_types):
        if db.is_rare(db.signature(g.node_types[s], t, g.node_attrs[d])):
            out.add(s)
            out.add(d)
    return out


def frequency_filter(g: ProvenanceGraph, db: FrequencyDb, k_layers: int) -> frozenset:
    """2K-hop closure around the endpoints of every rare edge."""
    return locality_filter(g, rare_edge_endpoints(g, db), k_layers)


# -- induced subgraphs ---------------------------------------------------------

def induced_subgraph(g: ProvenanceGraph, keep: Iterable[int]) -> ProvenanceGraph:
    """Copy of ``g`` restricted to ``keep`` and the edges among it.

    New ids follow ascending old id, so relative order is preserved. The
    result carries ``parent_ids`` (new -> old, int64 array) and ``remap``
    (old -> new dict).
    """
    old = np.unique(_check_nodes(g, keep))
    remap = {int(o): i for i, o in enumerate(old)}
    sub = ProvenanceGraph(skew_window_ms=g.skew_window_ms)
    for o in old:
        o = int(o)
        sub.add_node(g.node_keys[o], g.node_types[o], g.node_attrs[o])
    mask = np.zeros(g.n_nodes, dtype=bool)
    mask[old] = True
    src, dst = g.edge_arrays()
    for e in np.flatnonzero(mask[src] & mask[dst]) if src.size else ():
        e = int(e)
        sub.add_edge(remap[g.edge_src[e]], remap[g.edge_dst[e]], g.edge_types[e], g.edge_ts[e])
    sub.max_ts = g.max_ts
    sub.parent_ids = old
    sub.remap = remap
    return sub
