"""End-to-end detection driver.

Per detection interval: ingest -> filter -> featurize -> partition -> infer
-> score. Each interval also becomes an EMBED and a GNN stage job, and the
whole run is replayed through the simulated runtime to obtain latencies.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .config import PipelineConfig
from .detector import Alert, BenignProfile, detect, fit_profile
from .events import LogEvent
from .featurize import CostModel, run_embedding_stage
from .gnn import GnnModel, load_model, random_model, run_inference_stage
from .partitioner import binpack_ffd, materialize_bins, seed_neighborhoods
from .provgraph import (
    NS_PER_S,
    ActiveSnapshot,
    FrequencyDb,
    ProvenanceGraph,
    frequency_filter,
    induced_subgraph,
    locality_filter,
)
from .sim import Mode, SimResult, SimUnit, Stage, StageJob, simulate, write_replay_csv

logger = logging.getLogger(__name__)


@dataclass
class IntervalReport:
    interval: int
    nodes_total: int
    edges_total: int
    active_nodes: int
    nodes_after_filters: int
    embed_units: int
    embed_cost: float
    bins: int
    oversize_bins: int
    gnn_edges: int
    alerts: int
    latency_ms: float | None = None


@dataclass
class RunReport:
    mode: str
    intervals: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    alert_count: int = 0
    dropped_events: int = 0

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "intervals": [asdict(r) for r in self.intervals],
            "stats": self.stats,
            "alert_count": self.alert_count,
            "dropped_events": self.dropped_events,
        }


@dataclass
class RunOutput:
    report: RunReport
    workload: list
    sim: SimResult
    alerts: list
    packing_reports: list
    embeddings: list  # per interval (ids, values), kept for fit-profile


class DetectionPipeline:
    """Stateful driver holding the graph, model and profile across intervals."""

    def __init__(self, cfg: PipelineConfig, profile: BenignProfile | None = None):
        self.cfg = cfg
        self.k = cfg.k_layers
        self.graph = ProvenanceGraph(skew_window_ms=cfg.provgraph.skew_window_ms)
        self.model = self._model()
        self.freq_db = None
        if cfg.provgraph.frequency:
            self.freq_db = FrequencyDb.load(cfg.resolve(cfg.provgraph.freq_db))
            self.freq_db.threshold = cfg.provgraph.freq_threshold
        if profile is None and cfg.detector.profile:
            profile = BenignProfile.load(cfg.resolve(cfg.detector.profile))
        self.profile = profile
        self.cost_model = CostModel(cfg.featurize.cost_c0, cfg.featurize.cost_c1)
        self.interval_ns = int(round(cfg.provgraph.interval_seconds * NS_PER_S))

    def _model(self) -> GnnModel:
        path = self.cfg.resolve(self.cfg.gnn.model)
        if path is not None:
            return load_model(path)
        return random_model(self.cfg.gnn_dims, seed=self.cfg.seed, activation=self.cfg.gnn.activation)

    def relevant_nodes(self, snap: ActiveSnapshot) -> frozenset:
        pg = self.cfg.provgraph
        sets = []
        if pg.locality:
            sets.append(locality_filter(self.graph, snap.active, self.k))
        if pg.frequency:
            sets.append(frequency_filter(self.graph, self.freq_db, self.k))
        if not sets:
            return frozenset(range(self.graph.n_nodes)) if snap.active else frozenset()
        return frozenset.intersection(*sets)

    def process_interval(self, snap: ActiveSnapshot):
        cfg = self.cfg
        keep = self.relevant_nodes(snap)
        sub = induced_subgraph(self.graph, keep)
        emb = run_embedding_stage(
            enumerate(sub.node_attrs), cfg.featurize.unit_budget, cfg.featurize.dim, self.cost_model
        )
        init = emb.matrix(range(sub.n_nodes), cfg.featurize.dim)
        nbs = seed_neighborhoods(sub, range(sub.n_nodes), self.k)
        packing = binpack_ffd(
            nbs, cfg.partitioner.capacity, strict=cfg.partitioner.strict, fit=cfg.partitioner.fit
        )
        bins = materialize_bins(sub, packing, nbs)
        out = run_inference_stage(bins, init, self.model)

        alerts: list[Alert] = []
        if self.profile is None and len(out):
            # no benign profile supplied: the first non-empty interval is the baseline
            self.profile = fit_profile(out.values, cfg.detector.quantile, cfg.detector.eps)
            logger.info("fitted benign profile on interval %d (%d nodes)", snap.interval, len(out))
        elif len(out):
            _, alerts = detect(out.ids, out.values, self.profile, snap.interval, sub.node_attrs, sub.node_keys)

        per_edge = cfg.sim.gnn_cost_per_edge
        arrival_ms = (snap.interval + 1) * self.interval_ns / 1e6
        jobs = [
            StageJob(snap.interval, Stage.EMBED,
                     [SimUnit(u.total_cost, u.vertical_scale) for u in emb.units], arrival_ms),
            StageJob(snap.interval, Stage.GNN,
                     [SimUnit(b.f_k * per_edge, b.vertical_scale) for b in bins], arrival_ms),
        ]
        rep = IntervalReport(
            interval=snap.interval,
            nodes_total=snap.n_nodes,
            edges_total=snap.n_edges,
            active_nodes=len(snap.active),
            nodes_after_filters=sub.n_nodes,
            embed_units=len(emb.units),
            embed_cost=round(sum(u.total_cost for u in emb.units), 9),
            bins=len(bins),
            oversize_bins=sum(1 for b in bins if b.oversize),
            gnn_edges=sum(b.f_k for b in bins),
            alerts=len(alerts),
        )
        header = f"# interval {snap.interval}\n"
        return rep, jobs, alerts, header + packing.report(), (out.ids, out.values)

    def intervals(self, events: Iterable[LogEvent]):
        """Ingest the stream, yielding an ActiveSnapshot per closed interval."""
        g = self.graph
        origin = None
        current = 0
        for e in events:
            if origin is None:
                origin = e.ts
            idx = (e.ts - origin) // self.interval_ns
            while idx > current:
                yield g.close_interval(current)
                current += 1
            g.ingest(e)
        if origin is not None:
            yield g.close_interval(current)


def run_pipeline(
    cfg: PipelineConfig,
    events: Iterable[LogEvent],
    mode: Union[str, Mode, None] = None,
    profile: BenignProfile | None = None,
) -> RunOutput:
    pipe = DetectionPipeline(cfg, profile)
    reports, workload, alerts, packing, embeddings = [], [], [], [], []
    for snap in pipe.intervals(events):
        rep, jobs, al, pack, emb = pipe.process_interval(snap)
        reports.append(rep)
        workload.extend(jobs)
        alerts.extend(al)
        packing.append(pack)
        embeddings.append(emb)
    sim_cfg = cfg.sim if mode is None else cfg.sim.with_mode(mode)
    result = simulate(workload, sim_cfg)
    lat = dict(result.trace.samples)
    for r in reports:
        r.latency_ms = lat.get(r.interval)
    stats = result.summary()
    report = RunReport(
        mode=sim_cfg.mode,
        intervals=reports,
        stats=stats,
        alert_count=len(alerts),
        dropped_events=pipe.graph.dropped_events,
    )
    return RunOutput(report, workload, result, alerts, packing, embeddings)


def _dump_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_outputs(out: RunOutput, cfg: PipelineConfig, out_dir: Union[str, Path]) -> list[Path]:
    """Write the run's plot-ready artifacts; returns the paths written."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = {
        "latency": d / "latency.csv",
        "summary": d / "summary.json",
        "report": d / "report.json",
        "alerts": d / "alerts.jsonl",
        "packing": d / "packing.txt",
        "workload": d / "workload.csv",
    }
    out.sim.trace.to_csv(paths["latency"])
    summary = dict(out.report.stats)
    summary["mode"] = out.report.mode
    summary["alerts"] = out.report.alert_count
    _dump_json(paths["summary"], summary)
    _dump_json(paths["report"], out.report.to_json())
    with open(paths["alerts"], "w", encoding="utf-8") as fh:
        for a in out.alerts:
            fh.write(json.dumps(a.to_json(), sort_keys=True) + "\n")
    paths["packing"].write_text("".join(out.packing_reports), encoding="utf-8")
    write_replay_csv(paths["workload"], out.workload, cfg.sim.gnn_cost_per_edge)
    return list(paths.values())


def profile_from_run(out: RunOutput, quantile: float = 0.999, eps: float = 1e-9) -> BenignProfile:
    rows = [v for _, v in out.embeddings if len(v)]
    if not rows:
        raise ValueError("no node embeddings produced; cannot fit a profile")
    return fit_profile(np.vstack(rows), quantile, eps)

