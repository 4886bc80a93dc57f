"""Discrete-event simulation of serverless vs statically provisioned execution.

Every detection interval submits an EMBED stage and then, once all of its
embedding units have finished, a GNN stage. Units wait in one FIFO queue and
each instance serves one unit at a time. Detection latency of an interval is
the completion time of its GNN stage minus the arrival time of its EMBED
stage.

In SERVERLESS mode the pool grows whenever ``queued / instances`` exceeds
``scale_target`` (new instances serve after ``cold_start_ms``), shrinks after
``idle_timeout_ms`` of idleness down to ``min_instances``, and oversize units
get vertically scaled instances that run ``eta * v`` times faster. STATIC mode
keeps ``static_instances`` warm instances and has no scaling of either kind.

Events at equal times are processed in insertion order, so a run is a pure
function of (workload, config).
"""

from __future__ import annotations

import csv
import enum
import heapq
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .featurize import CostModel, EmbedWorkItem, pack_embedding_units


class Mode(enum.Enum):
    SERVERLESS = "serverless"
    STATIC = "static"


class Stage(enum.Enum):
    EMBED = "embed"
    GNN = "gnn"


class EventKind(enum.IntEnum):
    UNIT_ARRIVAL = 0
    INSTANCE_READY = 1
    UNIT_DONE = 2
    SCALE_CHECK = 3
    INSTANCE_RETIRE = 4


@dataclass
class SimConfig:
    mode: str = "serverless"
    static_instances: int = 4
    cold_start_ms: float = 1000.0
    per_cost_ms: float = 20.0
    gnn_cost_per_edge: float = 0.25
    unit_budget: float = 50.0
    max_instances: int = 64
    min_instances: int = 1
    scale_target: float = 2.0
    scale_check_ms: float = 500.0
    idle_timeout_ms: float = 30000.0
    vertical_efficiency: float = 0.8
    rng_seed: int = 0

    @property
    def mode_enum(self) -> Mode:
        return Mode(self.mode.lower())

    def errors(self) -> list[str]:
        out = []
        try:
            self.mode_enum
        except ValueError:
            out.append(f"sim.mode must be 'serverless' or 'static', got {self.mode!r}")
        for name in ("cold_start_ms", "per_cost_ms", "gnn_cost_per_edge", "unit_budget",
                     "scale_target", "scale_check_ms", "idle_timeout_ms"):
            if not getattr(self, name) > 0:
                out.append(f"sim.{name} must be positive")
        for name in ("static_instances", "max_instances"):
            if not getattr(self, name) >= 1:
                out.append(f"sim.{name} must be >= 1")
        if not 0 <= self.min_instances <= self.max_instances:
            out.append("sim.min_instances must lie in [0, max_instances]")
        if not 0 < self.vertical_efficiency <= 1:
            out.append("sim.vertical_efficiency must lie in (0, 1]")
        return out

    def validate(self) -> "SimConfig":
        errs = self.errors()
        if errs:
            raise ValueError("; ".join(errs))
        return self

    def with_mode(self, mode: Union[str, Mode], **overrides) -> "SimConfig":
        d = asdict(self)
        d["mode"] = mode.value if isinstance(mode, Mode) else mode
        d.update(overrides)
        return SimConfig(**d)


@dataclass(frozen=True)
class SimUnit:
    cost: float
    vertical_scale: int = 1


@dataclass
class StageJob:
    interval: int
    stage: Stage
    units: list
    arrival_ms: float = 0.0


# -- latency statistics ------------------------------------------------------

@dataclass
class LatencyTrace:
    samples: list = field(default_factory=list)  # (interval, latency_ms)

    @property
    def latencies(self) -> np.ndarray:
        return np.array([lat for _, lat in self.samples], dtype=np.float64)

    def __len__(self):
        return len(self.samples)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["interval", "latency_ms"])
            for i, lat in self.samples:
                w.writerow([i, repr(float(lat))])


def latency_stats(trace: Union[LatencyTrace, Sequence[float]]) -> tuple[float, float, float]:
    """Population mean, population standard deviation and their ratio (CV)."""
    x = trace.latencies if isinstance(trace, LatencyTrace) else np.asarray(trace, dtype=np.float64)
    if x.size == 0:
        raise ValueError("latency_stats needs at least one sample")
    mean = float(x.mean())
    if mean <= 0:
        raise ValueError("coefficient of variation is undefined for a non-positive mean")
    std = float(x.std())
    return mean, std, std / mean


def summarize(trace: LatencyTrace, instance_seconds: float | None = None) -> dict:
    x = trace.latencies
    out = {"intervals": int(x.size)}
    if x.size:
        mean = float(x.mean())
        std = float(x.std())
        out.update(
            mean=mean,
            std=std,
            cv=std / mean if mean > 0 else None,
            p50=float(np.percentile(x, 50)),
            p95=float(np.percentile(x, 95)),
            p99=float(np.percentile(x, 99)),
            max=float(x.max()),
        )
    if instance_seconds is not None:
        out["instance_seconds"] = instance_seconds
    return out


# -- simulator ---------------------------------------------------------------

class _Instance:
    __slots__ = ("id", "state", "launched", "retired", "epoch")

    def __init__(self, iid: int, state: str, launched: float):
        self.id = iid
        self.state = state  # starting | idle | busy | retired
        self.launched = launched
        self.retired: float | None = None
        self.epoch = 0


@dataclass
class SimResult:
    trace: LatencyTrace
    unit_latencies: np.ndarray
    instance_seconds: float
    peak_instances: int
    cold_starts: int
    units_completed: int
    end_ms: float

    def summary(self) -> dict:
        s = summarize(self.trace, self.instance_seconds)
        s["peak_instances"] = self.peak_instances
        s["cold_starts"] = self.cold_starts
        if self.unit_latencies.size:
            s["unit_p95"] = float(np.percentile(self.unit_latencies, 95))
        return s


class Simulator:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg.validate()
        self.mode = cfg.mode_enum

    def _push(self, t: float, kind: EventKind, payload=None):
        heapq.heappush(self._heap, (t, self._seq, kind, payload))
        self._seq += 1

    def run(self, workload: Sequence[StageJob]) -> SimResult:
        cfg = self.cfg
        self._heap: list = []
        self._seq = 0
        self._queue: deque = deque()
        self._instances: list[_Instance] = []
        self._check_pending = False
        self._cold_starts = 0
        self._extra_ms = 0.0  # resource time beyond 1x for vertically scaled units
        self._remaining: dict = {}
        self._stage_arrival: dict = {}
        self._embed_arrival: dict = {}
        self._gnn_jobs: dict = {}
        self._unit_lat: list[float] = []
        self._latency: dict = {}
        self._completed = 0

        last = -math.inf
        for job in workload:
            if job.stage is Stage.GNN:
                self._gnn_jobs[job.interval] = job
                continue
            if job.arrival_ms < last:
                raise ValueError("workload arrival times must be non-decreasing")
            last = job.arrival_ms
            self._push(job.arrival_ms, EventKind.UNIT_ARRIVAL, job)

        n0 = cfg.static_instances if self.mode is Mode.STATIC else cfg.min_instances
        for _ in range(n0):
            self._instances.append(_Instance(len(self._instances), "idle", 0.0))
        self._peak = n0

        now = 0.0
        while self._heap:
            now, _, kind, payload = heapq.heappop(self._heap)
            if kind is EventKind.UNIT_ARRIVAL:
                self._arrive(now, payload)
            elif kind is EventKind.INSTANCE_READY:
                payload.state = "idle"
                self._dispatch(now)
                self._maybe_idle(now, payload)
            elif kind is EventKind.UNIT_DONE:
                self._done(now, *payload)
            elif kind is EventKind.SCALE_CHECK:
                self._check_pending = False
                self._scale(now)
            elif kind is EventKind.INSTANCE_RETIRE:
                self._retire(now, *payload)

        end = max(now, 0.0)
        life = sum((i.retired if i.retired is not None else end) - i.launched for i in self._instances)
        samples = sorted(self._latency.items())
        return SimResult(
            trace=LatencyTrace(samples),
            unit_latencies=np.array(self._unit_lat),
            instance_seconds=(life + self._extra_ms) / 1000.0,
            peak_instances=self._peak,
            cold_starts=self._cold_starts,
            units_completed=self._completed,
            end_ms=end,
        )

    # -- handlers ------------------------------------------------------------
    def _arrive(self, now: float, job: StageJob):
        key = (job.interval, job.stage)
        self._stage_arrival[key] = now
        if job.stage is Stage.EMBED:
            self._embed_arrival[job.interval] = now
        if not job.units:
            self._stage_done(now, key)
            return
        self._remaining[key] = len(job.units)
        for u in job.units:
            self._queue.append((key, u))
        self._dispatch(now)
        self._scale(now)

    def _stage_done(self, now: float, key):
        interval, stage = key
        if stage is Stage.EMBED:
            job = self._gnn_jobs.get(interval) or StageJob(interval, Stage.GNN, [])
            self._arrive(now, job)
        else:
            self._latency[interval] = now - self._embed_arrival[interval]

    def _done(self, now: float, inst: _Instance, key, started: float):
        self._completed += 1
        self._unit_lat.append(now - self._stage_arrival[key])
        inst.state = "idle"
        self._remaining[key] -= 1
        if self._remaining[key] == 0:
            del self._remaining[key]
            self._stage_done(now, key)
        self._dispatch(now)
        self._maybe_idle(now, inst)

    def _service_ms(self, u: SimUnit) -> tuple[float, int]:
        base = u.cost * self.cfg.per_cost_ms
        if self.mode is Mode.SERVERLESS and u.vertical_scale > 1:
            v = u.vertical_scale
            return base / (self.cfg.vertical_efficiency * v), v
        return base, 1

    def _dispatch(self, now: float):
        if not self._queue:
            return
        for inst in self._instances:
            if not self._queue:
                break
            if inst.state != "idle":
                continue
            key, u = self._queue.popleft()
            service, v = self._service_ms(u)
            self._extra_ms += (v - 1) * service
            inst.state = "busy"
            self._push(now + service, EventKind.UNIT_DONE, (inst, key, now))

    def _live(self) -> int:
        return sum(1 for i in self._instances if i.state != "retired")

    def _scale(self, now: float):
        if self.mode is not Mode.SERVERLESS or not self._queue:
            return
        cfg = self.cfg
        queued = len(self._queue)
        live = self._live()
        if live == 0 or queued / live > cfg.scale_target:
            want = min(cfg.max_instances, math.ceil(queued / cfg.scale_target))
            for _ in range(want - live):
                inst = _Instance(len(self._instances), "starting", now)
                self._instances.append(inst)
                self._cold_starts += 1
                self._push(now + cfg.cold_start_ms, EventKind.INSTANCE_READY, inst)
            self._peak = max(self._peak, self._live())
        if self._queue and not self._check_pending:
            self._check_pending = True
            self._push(now + cfg.scale_check_ms, EventKind.SCALE_CHECK)

    def _maybe_idle(self, now: float, inst: _Instance):
        if self.mode is not Mode.SERVERLESS or inst.state != "idle":
            return
        inst.epoch += 1
        self._push(now + self.cfg.idle_timeout_ms, EventKind.INSTANCE_RETIRE, (inst, inst.epoch))

    def _retire(self, now: float, inst: _Instance, epoch: int):
        if inst.state != "idle" or inst.epoch != epoch:
            return
        if self._live() <= self.cfg.min_instances:
            return
        inst.state = "retired"
        inst.retired = now


def simulate(workload: Sequence[StageJob], cfg: SimConfig) -> SimResult:
    return Simulator(cfg).run(workload)


# -- workloads ---------------------------------------------------------------

@dataclass
class BurstEpisode:
    start: int
    duration: int
    multiplier: float


@dataclass
class WorkloadSpec:
    """Synthetic per-interval load: Poisson node counts with burst episodes."""

    n_intervals: int = 240
    interval_ms: float = 15000.0
    base_nodes: float = 300.0
    attr_len_median: float = 48.0
    attr_len_sigma: float = 0.6
    edges_per_node: float = 3.0
    supernode_prob: float = 0.05
    bursts: list = field(default_factory=list)

    def multiplier(self, interval: int) -> float:
        m = 1.0
        for b in self.bursts:
            if b.start <= interval < b.start + b.duration:
                m = max(m, b.multiplier)
        return m

    def flat(self) -> "WorkloadSpec":
        d = asdict(self)
        d["bursts"] = []
        return WorkloadSpec(**d)


def split_total(total: float, size: float) -> list[float]:
    """Chop ``total`` into chunks of ``size`` plus a remainder chunk."""
    if total <= 0:
        return []
    full = int(total // size)
    out = [float(size)] * full
    rem = total - full * size
    if rem > 1e-12:
        out.append(rem)
    return out


def gnn_units(edge_counts: Iterable[float], cost_per_edge: float) -> list[SimUnit]:
    return [SimUnit(e * cost_per_edge) for e in edge_counts]


def generate_workload(
    spec: WorkloadSpec,
    seed: int = 0,
    unit_budget: float = 50.0,
    capacity: int = 200,
    gnn_cost_per_edge: float = 0.25,
    cost_model: CostModel = CostModel(),
) -> list[StageJob]:
    """EMBED + GNN stage jobs per interval, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    jobs = []
    for i in range(spec.n_intervals):
        n = int(rng.poisson(spec.base_nodes * spec.multiplier(i)))
        lengths = np.rint(rng.lognormal(np.log(spec.attr_len_median), spec.attr_len_sigma, n))
        items = [EmbedWorkItem(j, "", cost_model(int(l))) for j, l in enumerate(lengths)]
        embed = [SimUnit(u.total_cost, u.vertical_scale)
                 for u in pack_embedding_units(items, unit_budget)]
        edges = int(rng.poisson(n * spec.edges_per_node)) if n else 0
        gnn = gnn_units(split_total(edges, capacity), gnn_cost_per_edge)
        if n and rng.random() < spec.supernode_prob:
            big = int(capacity * rng.uniform(1.5, 4.0))
            gnn.append(SimUnit(big * gnn_cost_per_edge, math.ceil(big / capacity)))
        arrival = (i + 1) * spec.interval_ms
        jobs.append(StageJob(i, Stage.EMBED, embed, arrival))
        jobs.append(StageJob(i, Stage.GNN, gnn, arrival))
    return jobs


REPLAY_HEADER = ["interval", "units_embed_cost_total", "units_gnn_edges_total"]


def write_replay_csv(path: Union[str, Path], jobs: Sequence[StageJob], gnn_cost_per_edge: float) -> None:
    rows: dict = {}
    for j in jobs:
        r = rows.setdefault(j.interval, [0.0, 0.0])
        total = sum(u.cost for u in j.units)
        if j.stage is Stage.EMBED:
            r[0] += total
        else:
            r[1] += total / gnn_cost_per_edge
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPLAY_HEADER)
        for i in sorted(rows):
            w.writerow([i, repr(round(rows[i][0], 9)), repr(round(rows[i][1], 9))])


def read_replay_csv(path: Union[str, Path]) -> list[tuple[int, float, float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != REPLAY_HEADER:
            raise ValueError(f"{path}: header must be {','.join(REPLAY_HEADER)}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                i, ec, ge = int(rec[0]), float(rec[1]), float(rec[2])
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: malformed replay row {rec!r}") from None
            if ec < 0 or ge < 0:
                raise ValueError(f"{path}:{lineno}: totals must be non-negative")
            rows.append((i, ec, ge))
    return rows


def workload_from_replay(
    rows: Sequence[tuple[int, float, float]],
    interval_ms: float = 15000.0,
    unit_budget: float = 50.0,
    capacity: int = 200,
    gnn_cost_per_edge: float = 0.25,
) -> list[StageJob]:
    jobs = []
    for i, embed_cost, gnn_edges in sorted(rows):
        arrival = (i + 1) * interval_ms
        jobs.append(StageJob(i, Stage.EMBED, [SimUnit(c) for c in split_total(embed_cost, unit_budget)], arrival))
        jobs.append(StageJob(i, Stage.GNN, gnn_units(split_total(gnn_edges, capacity), gnn_cost_per_edge), arrival))
    return jobs


def compare(workload: Sequence[StageJob], cfg: SimConfig) -> dict:
    """Run both modes on one workload and report the relative reductions."""
    out = {}
    for mode in Mode:
        out[mode.value] = simulate(workload, cfg.with_mode(mode)).summary()
    sl, st = out["serverless"], out["static"]
    red = {}
    for k in ("mean", "std", "cv", "p95"):
        a, b = sl.get(k), st.get(k)
        red[k] = (b - a) / b if a is not None and b else None
    out["reduction"] = red
    return out
