import os

import numpy as np
import pytest

from model.config import PipelineConfig
from model.types import GpsTrack


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Tests never see MTRACE_* settings from the developer's shell."""
    for name in list(os.environ):
        if name.startswith("MTRACE_"):
            monkeypatch.delenv(name)


@pytest.fixture
def cfg() -> PipelineConfig:
    return PipelineConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20231115)


@pytest.fixture
def empty_track() -> GpsTrack:
    return GpsTrack("u1", ())
