from __future__ import annotations

import numpy as np
import pytest

from helpers import event
from provfaas import data_path
from provfaas.events import EntityType, EventType


@pytest.fixture
def fork_event():
    return event(1, EventType.FORK, "p:1", "p:2", otype=EntityType.PROCESS)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def default_config_path():
    return data_path("default.toml")


@pytest.fixture
def sample_trace_path():
    return data_path("sample_trace.jsonl")
