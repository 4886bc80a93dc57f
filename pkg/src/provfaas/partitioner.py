"""K-hop subgraph partitioning and packing.

Each seed node contributes its K-hop ball ``B_K(v)``. Balls are packed into
bins (clusters) of bounded induced edge count. A cluster keeps its node set
``U`` and edge set ``E_G[U]`` as bitsets (Python ints, bit ``i`` = id ``i``).

Inserting a ball ``B`` into a cluster costs

    delta = |E_G[U | B]| - |E_G[U]|

which is computed exactly: an edge lies in ``E_G[S]`` iff its source and its
destination are both in ``S``, and "edges whose source is in S" distributes
over union. So each cluster and ball carries two edge bitsets, ``src_in`` and
``dst_in``, and ``E_G[U | B] = (src_U | src_B) & (dst_U | dst_B)``.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .provgraph import ProvenanceGraph, induced_subgraph


class Fit(enum.Enum):
    FIRST_FIT = "first_fit"
    BEST_FIT = "best_fit"

    @classmethod
    def coerce(cls, value) -> "Fit":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def mask_to_bits(mask: np.ndarray) -> int:
    """Boolean array -> int bitset (bit i set iff mask[i])."""
    if mask.size == 0:
        return 0
    return int.from_bytes(np.packbits(mask, bitorder="little").tobytes(), "little")


def bits_to_mask(bits: int, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=bool)
    raw = np.frombuffer(bits.to_bytes((n + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def bits_to_ids(bits: int, n: int) -> np.ndarray:
    return np.flatnonzero(bits_to_mask(bits, n))


def popcount(bits: int) -> int:
    return bits.bit_count()


@dataclass(frozen=True)
class Neighborhood:
    """``B_K(center)`` with its induced edges, all as bitsets."""

    center: int
    k: int
    nodes: int
    src_in: int
    dst_in: int
    edges: int
    edge_count: int
    n_nodes: int

    def node_ids(self, n: int) -> np.ndarray:
        return bits_to_ids(self.nodes, n)


def ball(g: ProvenanceGraph, center: int, k: int) -> np.ndarray:
    """Sorted node ids within ``k`` undirected hops of ``center``."""
    if center not in g:
        raise KeyError(f"node {center} is not in the graph")
    a = g.undirected_csr()
    indptr, indices = a.indptr, a.indices
    dist = {int(center): 0}
    q = deque([int(center)])
    while q:
        u = q.popleft()
        du = dist[u]
        if du == k:
            continue
        for w in indices[indptr[u] : indptr[u + 1]].tolist():
            if w not in dist:
                dist[w] = du + 1
                q.append(w)
    return np.array(sorted(dist), dtype=np.int64)


def neighborhood_from_nodes(g: ProvenanceGraph, center: int, k: int, nodes: np.ndarray) -> Neighborhood:
    mask = np.zeros(g.n_nodes, dtype=bool)
    mask[nodes] = True
    src, dst = g.edge_arrays()
    s_in = mask[src]
    d_in = mask[dst]
    src_bits = mask_to_bits(s_in)
    dst_bits = mask_to_bits(d_in)
    edges = src_bits & dst_bits
    return Neighborhood(
        center=int(center),
        k=k,
        nodes=mask_to_bits(mask),
        src_in=src_bits,
        dst_in=dst_bits,
        edges=edges,
        edge_count=popcount(edges),
        n_nodes=int(nodes.size),
    )


def khop_neighborhood(g: ProvenanceGraph, center: int, k: int) -> Neighborhood:
    if k < 1:
        raise ValueError("k must be a positive integer")
    return neighborhood_from_nodes(g, center, k, ball(g, center, k))


def seed_neighborhoods(g: ProvenanceGraph, seeds: Iterable[int], k: int) -> list[Neighborhood]:
    return [khop_neighborhood(g, int(s), k) for s in seeds]


@dataclass
class ClusterState:
    capacity: int
    members: list = field(default_factory=list)
    nodes: int = 0
    src_in: int = 0
    dst_in: int = 0
    covered_edges: int = 0
    f_k: int = 0

    @property
    def remain(self) -> int:
        return self.capacity - self.f_k

    def union_edges(self, nb: Neighborhood) -> int:
        return (self.src_in | nb.src_in) & (self.dst_in | nb.dst_in)

    def add(self, index: int, nb: Neighborhood) -> None:
        self.members.append(index)
        self.nodes |= nb.nodes
        self.src_in |= nb.src_in
        self.dst_in |= nb.dst_in
        self.covered_edges = self.src_in & self.dst_in
        self.f_k = popcount(self.covered_edges)


def marginal_cost(cluster: ClusterState, nb: Neighborhood) -> int:
    """Exact increase in induced edge count from merging ``nb`` into ``cluster``."""
    if not cluster.members:
        return nb.edge_count
    return popcount(cluster.union_edges(nb)) - cluster.f_k


def _fits(margin: int, remain: int, strict: bool) -> bool:
    return margin < remain if strict else margin <= remain


def _vertical_scale(edge_count: int, capacity: int, strict: bool) -> int:
    # smallest v such that edge_count fits v * capacity under the strict rule
    if strict:
        return edge_count // capacity + 1
    return max(1, math.ceil(edge_count / capacity))


@dataclass
class PackingResult:
    capacity: int
    strict: bool
    fit: Fit
    clusters: list
    oversize: list
    vertical_scale: list
    order: list

    @property
    def bins(self) -> list[list[int]]:
        return [list(c.members) for c in self.clusters]

    @property
    def remain(self) -> list[int]:
        return [c.remain for c in self.clusters]

    @property
    def subgraphs(self) -> list[int]:
        return [c.covered_edges for c in self.clusters]

    def __len__(self):
        return len(self.clusters)

    def report(self) -> str:
        lines = ["bin\tseeds\tf_k\tremain\toversize"]
        for b, c in enumerate(self.clusters):
            lines.append(f"{b}\t{len(c.members)}\t{c.f_k}\t{c.remain}\t{int(self.oversize[b])}")
        return "\n".join(lines) + "\n"


def binpack_ffd(
    neighborhoods: Sequence[Neighborhood],
    capacity: int,
    strict: bool = False,
    fit: Fit | str = Fit.FIRST_FIT,
    on_insert=None,
) -> PackingResult:
    """First-fit / best-fit decreasing packing of K-hop neighborhoods.

    Neighborhoods are visited by edge count descending, ties by index. Each
    goes to the first bin (FIRST_FIT) or the feasible bin leaving the least
    residual capacity (BEST_FIT, ties to the lower bin) whose marginal cost
    fits: ``margin < remain`` when ``strict`` else ``margin <= remain``. If no
    bin fits, a new one is opened; a neighborhood that alone violates the
    capacity rule still gets its own bin, flagged oversize.

    ``on_insert(bin_index, cluster)`` is called after every insertion; the
    test-suite uses it to audit the incremental bookkeeping.
    """
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    fit = Fit.coerce(fit)
    order = sorted(range(len(neighborhoods)), key=lambda i: (-neighborhoods[i].edge_count, i))
    clusters: list[ClusterState] = []
    oversize: list[bool] = []
    vscale: list[int] = []
    for idx in order:
        nb = neighborhoods[idx]
        target = None
        if fit is Fit.FIRST_FIT:
            for b, c in enumerate(clusters):
                if _fits(marginal_cost(c, nb), c.remain, strict):
                    target = b
                    break
        else:
            best = None
            for b, c in enumerate(clusters):
                margin = marginal_cost(c, nb)
                if _fits(margin, c.remain, strict):
                    slack = c.remain - margin
                    if best is None or slack < best:
                        best, target = slack, b
        if target is None:
            c = ClusterState(capacity)
            clusters.append(c)
            over = not _fits(nb.edge_count, capacity, strict)
            oversize.append(over)
            vscale.append(_vertical_scale(nb.edge_count, capacity, strict) if over else 1)
            target = len(clusters) - 1
        clusters[target].add(idx, nb)
        if on_insert is not None:
            on_insert(target, clusters[target])
    return PackingResult(capacity, strict, fit, clusters, oversize, vscale, order)


@dataclass
class MaterializedBin:
    index: int
    subgraph: ProvenanceGraph
    seeds: np.ndarray
    local_seeds: np.ndarray
    f_k: int
    oversize: bool
    vertical_scale: int


def materialize_bins(
    g: ProvenanceGraph, result: PackingResult, neighborhoods: Sequence[Neighborhood]
) -> list[MaterializedBin]:
    """Induced subgraph on each bin's node set, plus the seeds it owns."""
    out = []
    for b, c in enumerate(result.clusters):
        sub = induced_subgraph(g, bits_to_ids(c.nodes, g.n_nodes))
        seeds = np.array(sorted(neighborhoods[i].center for i in c.members), dtype=np.int64)
        local = np.array([sub.remap[int(s)] for s in seeds], dtype=np.int64)
        out.append(
            MaterializedBin(b, sub, seeds, local, c.f_k, result.oversize[b], result.vertical_scale[b])
        )
    return out


def partition_graph(
    g: ProvenanceGraph,
    seeds: Iterable[int],
    k: int,
    capacity: int,
    strict: bool = False,
    fit: Fit | str = Fit.BEST_FIT,
) -> tuple[PackingResult, list[MaterializedBin]]:
    """Neighborhoods for ``seeds``, packed and materialised."""
    nbs = seed_neighborhoods(g, seeds, k)
    result = binpack_ffd(nbs, capacity, strict=strict, fit=fit)
    return result, materialize_bins(g, result, nbs)
