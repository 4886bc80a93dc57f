"""Provenance-graph intrusion detection served as elastic execution units."""

from importlib import resources
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .detector import BenignProfile, CentroidDistanceDetector, fit_profile
from .events import EntityType, EventType, LogEvent, read_events
from .featurize import TrigramHashEmbedder, embed_attr, pack_embedding_units, run_embedding_stage
from .gnn import GnnModel, forward, load_model, random_model, run_inference_stage, save_model
from .partitioner import Fit, binpack_ffd, khop_neighborhood, marginal_cost, materialize_bins
from .pipeline import run_pipeline
from .provgraph import (
    FrequencyDb,
    ProvenanceGraph,
    build_frequency_db,
    frequency_filter,
    induced_subgraph,
    locality_filter,
)
from .sim import SimConfig, WorkloadSpec, generate_workload, latency_stats, simulate

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "PipelineConfig",
    "load_config",
    "BenignProfile",
    "CentroidDistanceDetector",
    "fit_profile",
    "EntityType",
    "EventType",
    "LogEvent",
    "read_events",
    "TrigramHashEmbedder",
    "embed_attr",
    "pack_embedding_units",
    "run_embedding_stage",
    "GnnModel",
    "forward",
    "load_model",
    "random_model",
    "run_inference_stage",
    "save_model",
    "Fit",
    "binpack_ffd",
    "khop_neighborhood",
    "marginal_cost",
    "materialize_bins",
    "run_pipeline",
    "FrequencyDb",
    "ProvenanceGraph",
    "build_frequency_db",
    "frequency_filter",
    "induced_subgraph",
    "locality_filter",
    "SimConfig",
    "WorkloadSpec",
    "generate_workload",
    "latency_stats",
    "simulate",
    "data_path",
]


def data_path(name: str) -> Path:
    """Path of a file bundled in ``provfaas/data``."""
    return Path(str(resources.files("provfaas") / "data" / name))
