"""Pipeline configuration: one TOML file, validated as a whole before any run."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .partitioner import Fit
from .sim import BurstEpisode, SimConfig, WorkloadSpec


class ConfigError(ValueError):
    """Raised with every violated constraint, one per line."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class GraphSection:
    interval_seconds: float = 15.0
    k_layers: int = 2
    freq_threshold: float = 10
    skew_window_ms: int = 5000
    freq_db: str = ""
    locality: bool = True
    frequency: bool = False


@dataclass
class FeaturizeSection:
    dim: int = 64
    unit_budget: float = 50.0
    cost_c0: float = 1.0
    cost_c1: float = 0.01


@dataclass
class PartitionerSection:
    k_layers: int = 2
    capacity: int = 200
    strict: bool = False
    fit: str = "best_fit"


@dataclass
class GnnSection:
    k_layers: int = 2
    model: str = ""
    hidden: int = 64
    out_dim: int = 32
    activation: str = "relu"


@dataclass
class DetectorSection:
    quantile: float = 0.999
    eps: float = 1e-9
    profile: str = ""


def default_workload() -> WorkloadSpec:
    # flat base load with four burst episodes of varying height and length
    return WorkloadSpec(
        bursts=[
            BurstEpisode(30, 6, 8.0),
            BurstEpisode(80, 4, 12.0),
            BurstEpisode(130, 8, 6.0),
            BurstEpisode(190, 5, 10.0),
        ]
    )


@dataclass
class PipelineConfig:
    seed: int = 0
    provgraph: GraphSection = field(default_factory=GraphSection)
    featurize: FeaturizeSection = field(default_factory=FeaturizeSection)
    partitioner: PartitionerSection = field(default_factory=PartitionerSection)
    gnn: GnnSection = field(default_factory=GnnSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    sim: SimConfig = field(default_factory=SimConfig)
    workload: WorkloadSpec = field(default_factory=default_workload)
    base_dir: Path = field(default_factory=Path.cwd, repr=False, compare=False)

    @property
    def k_layers(self) -> int:
        return self.provgraph.k_layers

    @property
    def gnn_dims(self) -> list[int]:
        return [self.featurize.dim] + [self.gnn.hidden] * (self.gnn.k_layers - 1) + [self.gnn.out_dim]

    def resolve(self, path: str) -> Path | None:
        if not path:
            return None
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def problems(self) -> list[str]:
        out = []
        pg, fz, pt, gn, dt = self.provgraph, self.featurize, self.partitioner, self.gnn, self.detector
        if not pg.interval_seconds > 0:
            out.append("provgraph.interval_seconds must be positive")
        for name, k in (("provgraph", pg.k_layers), ("partitioner", pt.k_layers), ("gnn", gn.k_layers)):
            if not (isinstance(k, int) and k >= 1):
                out.append(f"{name}.k_layers must be a positive integer")
        if len({pg.k_layers, pt.k_layers, gn.k_layers}) > 1:
            out.append(
                "k_layers mismatch: provgraph=%s partitioner=%s gnn=%s (must all equal the GNN depth)"
                % (pg.k_layers, pt.k_layers, gn.k_layers)
            )
        if pg.skew_window_ms < 0:
            out.append("provgraph.skew_window_ms must be >= 0")
        if pg.frequency and not pg.freq_db:
            out.append("provgraph.filters.frequency requires provgraph.freq_db")
        if pg.freq_db and not self.resolve(pg.freq_db).exists():
            out.append(f"provgraph.freq_db not found: {pg.freq_db}")
        if fz.dim < 1:
            out.append("featurize.dim must be >= 1")
        if not fz.unit_budget > 0:
            out.append("featurize.unit_budget must be positive")
        if fz.cost_c0 < 0 or fz.cost_c1 < 0:
            out.append("featurize cost coefficients must be >= 0")
        if not pt.capacity > 0:
            out.append("partitioner.capacity must be positive")
        try:
            Fit.coerce(pt.fit)
        except ValueError:
            out.append(f"partitioner.fit must be first_fit or best_fit, got {pt.fit!r}")
        if gn.activation.lower() not in ("relu", "tanh"):
            out.append(f"gnn.activation must be relu or tanh, got {gn.activation!r}")
        if gn.hidden < 1 or gn.out_dim < 1:
            out.append("gnn.hidden and gnn.out_dim must be >= 1")
        if gn.model:
            mp = self.resolve(gn.model)
            if not mp.exists():
                out.append(f"gnn.model not found: {gn.model}")
            else:
                from .gnn import load_model

                try:
                    m = load_model(mp)
                except ValueError as exc:
                    out.append(f"gnn.model unreadable: {exc}")
                else:
                    if m.k_layers != gn.k_layers:
                        out.append(f"gnn.model has {m.k_layers} layers but gnn.k_layers={gn.k_layers}")
                    if m.dims[0] != fz.dim:
                        out.append(f"gnn.model input dim {m.dims[0]} != featurize.dim {fz.dim}")
        if not 0 <= dt.quantile <= 1:
            out.append("detector.quantile must lie in [0, 1]")
        if dt.profile and not self.resolve(dt.profile).exists():
            out.append(f"detector.profile not found: {dt.profile}")
        out.extend(self.sim.errors())
        wl = self.workload
        if wl.n_intervals < 0 or not wl.interval_ms > 0 or wl.base_nodes < 0:
            out.append("workload: n_intervals >= 0, interval_ms > 0, base_nodes >= 0 required")
        return out

    def validate(self) -> "PipelineConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self


_SECTIONS = {
    "provgraph": GraphSection,
    "featurize": FeaturizeSection,
    "partitioner": PartitionerSection,
    "gnn": GnnSection,
    "detector": DetectorSection,
    "sim": SimConfig,
}


def _build(cls, data: dict, where: str, problems: list[str]):
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for k, v in data.items():
        if k not in known:
            problems.append(f"unknown key {where}.{k}")
        else:
            kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc}")
        return cls()


def config_from_dict(doc: dict, base_dir: Union[str, Path, None] = None) -> PipelineConfig:
    problems: list[str] = []
    doc = dict(doc)
    cfg = PipelineConfig(base_dir=Path(base_dir) if base_dir else Path.cwd())
    seed = doc.pop("seed", 0)
    if not isinstance(seed, int):
        problems.append("seed must be an integer")
        seed = 0
    cfg.seed = seed
    for name, cls in _SECTIONS.items():
        sec = dict(doc.pop(name, {}))
        if name == "provgraph":
            filt = sec.pop("filters", {})
            for fk, fv in filt.items():
                if fk in ("locality", "frequency"):
                    sec[fk] = fv
                else:
                    problems.append(f"unknown key provgraph.filters.{fk}")
        setattr(cfg, name, _build(cls, sec, name, problems))
    wl = dict(doc.pop("workload", {}))
    bursts = wl.pop("bursts", None)
    spec = _build(WorkloadSpec, wl, "workload", problems)
    if bursts is None:
        spec.bursts = default_workload().bursts
    else:
        try:
            spec.bursts = [BurstEpisode(int(s), int(d), float(m)) for s, d, m in bursts]
        except (TypeError, ValueError):
            problems.append("workload.bursts must be a list of [start, duration, multiplier]")
    cfg.workload = spec
    for k in doc:
        problems.append(f"unknown top-level key {k}")
    cfg.sim.unit_budget = cfg.featurize.unit_budget
    cfg.sim.rng_seed = cfg.seed
    if problems:
        raise ConfigError(problems + cfg.problems())
    return cfg


def load_config(path: Union[str, Path, None] = None) -> PipelineConfig:
    """Read and validate a config file; ``None`` gives the defaults."""
    if path is None:
        return PipelineConfig().validate()
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    return config_from_dict(doc, base_dir=path.parent).validate()


def config_to_dict(cfg: PipelineConfig) -> dict:
    d = {"seed": cfg.seed}
    for name in _SECTIONS:
        d[name] = asdict(getattr(cfg, name))
    wl = asdict(cfg.workload)
    wl["bursts"] = [[b["start"], b["duration"], b["multiplier"]] for b in wl["bursts"]]
    d["workload"] = wl
    pg = d["provgraph"]
    pg["filters"] = {"locality": pg.pop("locality"), "frequency": pg.pop("frequency")}
    return d
