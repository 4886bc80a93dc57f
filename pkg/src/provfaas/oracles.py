"""Brute-force reference computations and randomized self-checks.

Every reference here is written independently of the optimized path it
checks: plain-Python BFS instead of sparse matrix products, per-edge recounts
instead of bitset algebra, exhaustive set partitions instead of heuristics,
and a float64 per-node loop instead of the fixed-order float32 kernels.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import partitioner as part
from .featurize import run_embedding_stage
from .gnn import GnnModel, forward, random_model, run_inference_stage
from .provgraph import ProvenanceGraph, locality_filter
from .sim import latency_stats

# -- random instances --------------------------------------------------------


def random_graph(rng: np.random.Generator, n: int, avg_degree: float = 2.0) -> ProvenanceGraph:
    """Sparse random multigraph; occasional parallel edges and self-loops."""
    m = int(rng.poisson(n * avg_degree / 2)) if n > 1 else 0
    src = rng.integers(0, n, m)
    dst = rng.integers(0, n, m)
    dup = rng.random(m) < 0.05
    edges = list(zip(src.tolist(), dst.tolist()))
    edges += [e for e, d in zip(edges, dup) if d]
    return ProvenanceGraph.from_edges(n, edges)


# -- references --------------------------------------------------------------


def adjacency_sets(g: ProvenanceGraph) -> list[set]:
    adj = [set() for _ in range(g.n_nodes)]
    for s, d in zip(g.edge_src, g.edge_dst):
        adj[s].add(d)
        adj[d].add(s)
    return adj


def bfs_within(adj: Sequence[set], sources, depth: int) -> set:
    dist = {}
    q = deque()
    for s in sources:
        if s not in dist:
            dist[s] = 0
            q.append(s)
    while q:
        u = q.popleft()
        if dist[u] == depth:
            continue
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    return set(dist)


def induced_edge_count(g: ProvenanceGraph, nodes) -> int:
    nodes = set(nodes)
    return sum(1 for s, d in zip(g.edge_src, g.edge_dst) if s in nodes and d in nodes)


def induced_edge_count_np(src: np.ndarray, dst: np.ndarray, n: int, nodes) -> int:
    mask = np.zeros(n, dtype=bool)
    mask[list(nodes)] = True
    return int(np.count_nonzero(mask[src] & mask[dst]))


def set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in set_partitions(rest):
        yield [[first]] + p
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1 :]


def optimal_bin_count(g: ProvenanceGraph, balls: Sequence[set], capacity: int, strict: bool) -> int:
    """Fewest blocks over all set partitions whose merged balls fit capacity.

    Singleton blocks are always allowed (an oversize ball gets its own bin).
    """
    def ok(block):
        if len(block) == 1:
            return True
        f = induced_edge_count(g, set().union(*(balls[i] for i in block)))
        return f < capacity if strict else f <= capacity

    best = len(balls)
    for p in set_partitions(list(range(len(balls)))):
        if len(p) < best and all(ok(b) for b in p):
            best = len(p)
    return best


def naive_forward(g: ProvenanceGraph, init: np.ndarray, model: GnnModel) -> np.ndarray:
    adj = adjacency_sets(g)
    h = np.asarray(init, dtype=np.float64)
    for w, b in zip(model.weights, model.biases):
        w = w.astype(np.float64)
        b = b.astype(np.float64)
        nxt = np.zeros((g.n_nodes, w.shape[0]))
        for v in range(g.n_nodes):
            nb = sorted(adj[v] - {v})
            mean = np.mean([h[u] for u in nb], axis=0) if nb else np.zeros(h.shape[1])
            z = w @ np.concatenate([h[v], mean]) + b
            nxt[v] = np.maximum(z, 0) if model.activation == "relu" else np.tanh(z)
        h = nxt
    return h


def two_pass_stats(x: Sequence[float]) -> tuple[float, float, float]:
    x = list(map(float, x))
    mean = math.fsum(x) / len(x)
    var = math.fsum((v - mean) ** 2 for v in x) / len(x)
    std = math.sqrt(var)
    return mean, std, std / mean


# -- randomized checks ---------------------------------------------------------


@dataclass
class OracleReport:
    name: str
    total: int = 0
    failures: list = field(default_factory=list)  # (seed, message)

    @property
    def passed(self) -> int:
        return self.total - len({s for s, _ in self.failures})

    @property
    def ok(self) -> bool:
        return not self.failures

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        msg = f"[{status}] {self.name}: {self.passed}/{self.total}"
        if self.failures:
            seed, why = self.failures[0]
            msg += f" (first failing seed {seed}: {why})"
        return msg


def check_locality(seeds: int = 200, max_nodes: int = 10_000, base_seed: int = 0) -> OracleReport:
    rep = OracleReport("locality-filter == depth-limited BFS")
    for s in range(base_seed, base_seed + seeds):
        rng = np.random.default_rng(s)
        n = int(np.exp(rng.uniform(np.log(2), np.log(max_nodes))))
        g = random_graph(rng, n, avg_degree=rng.uniform(0.5, 3.0))
        k = int(rng.integers(1, 4))
        active = set(rng.choice(n, size=int(rng.integers(1, min(n, 20) + 1)), replace=False).tolist())
        rep.total += 1
        got = locality_filter(g, active, k)
        want = bfs_within(adjacency_sets(g), active, 2 * k)
        if got != want:
            rep.failures.append((s, f"n={n} K={k}: {len(got ^ want)} nodes differ"))
    return rep


def _random_packing_case(rng: np.random.Generator, max_nodes: int, max_seeds: int):
    n = int(rng.integers(2, max_nodes + 1))
    g = random_graph(rng, n, avg_degree=rng.uniform(1.0, 3.0))
    k = int(rng.integers(1, 3))
    n_seeds = int(rng.integers(1, min(n, max_seeds) + 1))
    seeds = rng.choice(n, size=n_seeds, replace=False).tolist()
    nbs = part.seed_neighborhoods(g, seeds, k)
    biggest = max(nb.edge_count for nb in nbs)
    capacity = int(rng.integers(1, max(2, 2 * biggest + 2)))
    strict = bool(rng.integers(0, 2))
    fit = part.Fit.FIRST_FIT if rng.integers(0, 2) else part.Fit.BEST_FIT
    return g, k, seeds, nbs, capacity, strict, fit


def audit_packing(g: ProvenanceGraph, k: int, seeds, nbs, result: part.PackingResult) -> list[str]:
    """Replay the insertion sequence and recount every quantity from scratch."""
    problems = []
    adj = adjacency_sets(g)
    balls = [bfs_within(adj, [s], k) for s in seeds]
    for i, nb in enumerate(nbs):
        if set(part.bits_to_ids(nb.nodes, g.n_nodes).tolist()) != balls[i]:
            problems.append(f"ball of seed {seeds[i]} differs from BFS")
        if nb.edge_count != induced_edge_count(g, balls[i]):
            problems.append(f"edge count of seed {seeds[i]} differs from recount")
    src, dst = g.edge_arrays()
    where = {}
    for b, members in enumerate(result.bins):
        for m in members:
            where[m] = b
    if sorted(where) != list(range(len(nbs))) or sum(map(len, result.bins)) != len(nbs):
        problems.append("seeds not placed exactly once")
        return problems
    shadow = [part.ClusterState(result.capacity) for _ in result.bins]
    union = [set() for _ in result.bins]
    for idx in result.order:
        b = where[idx]
        before = induced_edge_count_np(src, dst, g.n_nodes, union[b])
        after = induced_edge_count_np(src, dst, g.n_nodes, union[b] | balls[idx])
        delta = part.marginal_cost(shadow[b], nbs[idx])
        if delta != after - before:
            problems.append(f"delta for seed index {idx}: got {delta}, recount {after - before}")
        shadow[b].add(idx, nbs[idx])
        union[b] |= balls[idx]
        if shadow[b].f_k != after:
            problems.append(f"f_k after inserting {idx}: got {shadow[b].f_k}, recount {after}")
    for b, c in enumerate(result.clusters):
        f = induced_edge_count_np(src, dst, g.n_nodes, union[b])
        if c.f_k != f:
            problems.append(f"bin {b}: f_k {c.f_k} != recount {f}")
        if not result.oversize[b]:
            if (result.strict and not f < result.capacity) or (not result.strict and f > result.capacity):
                problems.append(f"bin {b}: f_k {f} violates capacity {result.capacity}")
        elif len(c.members) == 0:
            problems.append(f"bin {b}: empty oversize bin")
        for m in c.members:
            if not balls[m] <= union[b]:
                problems.append(f"bin {b}: seed coverage broken for index {m}")
    return problems


def check_bookkeeping(seeds: int = 200, max_nodes: int = 2000, max_seeds: int = 150,
                      base_seed: int = 0) -> OracleReport:
    """Maintained f_k equals |E_G[U_k]| recounted after every insertion."""
    rep = OracleReport("f_k bookkeeping == from-scratch recount")
    for s in range(base_seed, base_seed + seeds):
        rng = np.random.default_rng(10_000 + s)
        g, k, seed_nodes, nbs, capacity, strict, fit = _random_packing_case(rng, max_nodes, max_seeds)
        adj = adjacency_sets(g)
        balls = {i: bfs_within(adj, [v], k) for i, v in enumerate(seed_nodes)}
        src, dst = g.edge_arrays()
        bad = []

        def on_insert(b, cluster):
            u = set().union(*(balls[m] for m in cluster.members))
            f = induced_edge_count_np(src, dst, g.n_nodes, u)
            if f != cluster.f_k or cluster.remain != capacity - f:
                bad.append(f"bin {b}: maintained f_k {cluster.f_k} != recount {f}")

        part.binpack_ffd(nbs, capacity, strict=strict, fit=fit, on_insert=on_insert)
        rep.total += 1
        if bad:
            rep.failures.append((s, bad[0]))
    return rep


def check_packing(seeds: int = 100, max_nodes: int = 60, max_seeds: int = 8,
                  base_seed: int = 0) -> OracleReport:
    """Capacity, completeness, exact deltas and heuristic >= exhaustive optimum."""
    rep = OracleReport("packing validity + bins >= exhaustive optimum")
    for s in range(base_seed, base_seed + seeds):
        rng = np.random.default_rng(20_000 + s)
        g, k, seed_nodes, nbs, capacity, strict, fit = _random_packing_case(rng, max_nodes, max_seeds)
        rep.total += 1
        result = part.binpack_ffd(nbs, capacity, strict=strict, fit=fit)
        problems = audit_packing(g, k, seed_nodes, nbs, result)
        adj = adjacency_sets(g)
        balls = [bfs_within(adj, [v], k) for v in seed_nodes]
        if len(nbs) <= 8:
            opt = optimal_bin_count(g, balls, capacity, strict)
            if len(result) < opt:
                problems.append(f"{len(result)} bins beats exhaustive optimum {opt}")
        if not 1 <= len(result) <= len(nbs):
            problems.append(f"bin count {len(result)} outside [1, {len(nbs)}]")
        if problems:
            rep.failures.append((s, problems[0]))
    return rep


def check_gnn_equivalence(seeds: int = 20, nodes: int = 500, k: int = 2, dim: int = 16,
                          base_seed: int = 0) -> OracleReport:
    """Packed inference is bitwise equal to one monolithic forward pass."""
    rep = OracleReport("partitioned inference == monolithic (bitwise)")
    for s in range(base_seed, base_seed + seeds):
        rng = np.random.default_rng(30_000 + s)
        g = random_graph(rng, nodes, avg_degree=rng.uniform(1.0, 3.0))
        model = random_model([dim] + [dim] * (k - 1) + [8], seed=s)
        init = rng.standard_normal((nodes, dim)).astype(np.float32)
        mono = forward(g, init, model)
        nbs = part.seed_neighborhoods(g, range(nodes), k)
        cap = int(rng.integers(max(nb.edge_count for nb in nbs) // 2 + 1, 4 * max(nb.edge_count for nb in nbs) + 2))
        result = part.binpack_ffd(nbs, cap, strict=bool(rng.integers(0, 2)), fit=part.Fit.BEST_FIT)
        bins = part.materialize_bins(g, result, nbs)
        out = run_inference_stage(bins, init, model)
        rep.total += 1
        if not np.array_equal(out.ids, np.arange(nodes)):
            rep.failures.append((s, "seed set differs from all nodes"))
        elif not np.array_equal(out.values.view(np.uint32), mono.view(np.uint32)):
            diff = float(np.abs(out.values - mono).max())
            rep.failures.append((s, f"{len(bins)} bins, max abs diff {diff:g}"))
    return rep


def check_gnn_reference(seeds: int = 20, nodes: int = 60, k: int = 2, dim: int = 8,
                        tol: float = 1e-6, base_seed: int = 0) -> OracleReport:
    rep = OracleReport(f"forward == naive float64 per-node loop (atol {tol:g})")
    for s in range(base_seed, base_seed + seeds):
        rng = np.random.default_rng(40_000 + s)
        g = random_graph(rng, nodes)
        act = "relu" if s % 2 == 0 else "tanh"
        model = random_model([dim] * k + [dim], seed=s, activation=act)
        init = rng.uniform(-1, 1, (nodes, dim)).astype(np.float32)
        diff = float(np.abs(forward(g, init, model) - naive_forward(g, init, model)).max(initial=0))
        rep.total += 1
        if diff > tol:
            rep.failures.append((s, f"max abs diff {diff:g}"))
    return rep


def check_featurize(seeds: int = 5, nodes: int = 1000, base_seed: int = 0) -> OracleReport:
    rep = OracleReport("featurization independent of unit budget")
    rng = np.random.default_rng(50_000 + base_seed)
    alphabet = np.array(list("abcdefghijklmnopqrstuvwxyz/._-0123456789"))
    attrs = {i: "".join(rng.choice(alphabet, int(rng.integers(0, 120)))) for i in range(nodes)}
    mono = run_embedding_stage(attrs, unit_budget=1e12)
    for s in range(base_seed, base_seed + seeds):
        budget = float(np.random.default_rng(s).uniform(1.5, 40.0))
        got = run_embedding_stage(attrs, unit_budget=budget)
        rep.total += 1
        same = got.vectors.keys() == mono.vectors.keys() and all(
            got.vectors[i].tobytes() == mono.vectors[i].tobytes() for i in attrs
        )
        if not same:
            rep.failures.append((s, f"budget {budget:.3f} changed vectors"))
    return rep


def check_stats(seeds: int = 100, tol: float = 1e-9, base_seed: int = 0) -> OracleReport:
    rep = OracleReport("latency_stats == two-pass reference")
    for s in range(base_seed, base_seed + seeds):
        rng = np.random.default_rng(60_000 + s)
        x = rng.lognormal(0.5, 1.0, int(rng.integers(1, 500))).tolist()
        got = latency_stats(x)
        want = two_pass_stats(x)
        rep.total += 1
        if any(abs(a - b) > tol * max(1.0, abs(b)) for a, b in zip(got, want)):
            rep.failures.append((s, f"{got} vs {want}"))
    return rep


ORACLES: dict[str, Callable[..., OracleReport]] = {
    "locality": check_locality,
    "bookkeeping": check_bookkeeping,
    "packing": check_packing,
    "gnn-equivalence": check_gnn_equivalence,
    "gnn-reference": check_gnn_reference,
    "featurize": check_featurize,
    "stats": check_stats,
}
