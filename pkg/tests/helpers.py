"""Small graph and event builders shared by the test modules."""

from __future__ import annotations

from pathlib import Path

from provfaas.events import EntityType, LogEvent
from provfaas.provgraph import ProvenanceGraph

GOLDEN = Path(__file__).parent / "golden"


def path_graph(n: int) -> ProvenanceGraph:
    return ProvenanceGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> ProvenanceGraph:
    return ProvenanceGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(leaves: int) -> ProvenanceGraph:
    return ProvenanceGraph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def event(ts, etype, subj, obj, stype=EntityType.PROCESS, otype=EntityType.FILE, sattr=None, oattr=None):
    return LogEvent(
        ts,
        etype,
        subj,
        stype,
        sattr if sattr is not None else subj,
        obj,
        otype,
        oattr if oattr is not None else obj,
    )

