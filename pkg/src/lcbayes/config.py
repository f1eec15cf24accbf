"""Experiment configuration (JSON, versioned, unknown fields rejected)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .data_gen import Gamma, TruthSpec
from .mcmc import SamplerSettings
from .priors import PriorConfig

__all__ = [
    "SCHEMA_VERSION",
    "SamplePriorSettings",
    "Table1Settings",
    "RateSettings",
    "ApproxSettings",
    "ExperimentConfig",
    "load_config",
]

SCHEMA_VERSION = 1
MAX_SEED = 2**64 - 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SamplePriorSettings(_Section):
    draws: int = Field(default=5, ge=0)
    grid_size: int = Field(default=512, ge=2)


class Table1Settings(_Section):
    n_values: tuple[int, ...] = (50, 200, 500)
    points: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    replications: int = Field(default=100, ge=1)
    level: float = Field(default=0.95, gt=0, le=1)


class RateSettings(_Section):
    n_values: tuple[int, ...] = (100, 400, 1600)
    replications: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def _three_sizes(self):
        if len(self.n_values) < 3:
            raise ValueError("rate needs at least three sample sizes")
        return self


class ApproxSettings(_Section):
    n: int = Field(default=10_000, ge=2)
    interval: Optional[tuple[float, float]] = None


class ExperimentConfig(_Section):
    """Everything one CLI invocation needs.

    ``data_path`` points at a one-column CSV of observations; when absent,
    ``n`` observations are drawn from ``truth``.
    """

    schema_version: int = SCHEMA_VERSION
    truth: TruthSpec = Field(default_factory=Gamma)
    n: int = Field(default=500, ge=2)
    data_path: Optional[str] = None
    prior: PriorConfig = Field(default_factory=PriorConfig)
    sampler: SamplerSettings = Field(default_factory=lambda: SamplerSettings(iterations=2000))
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    outputs: str = "out"
    sample_prior: SamplePriorSettings = Field(default_factory=SamplePriorSettings)
    table1: Table1Settings = Field(default_factory=Table1Settings)
    rate: RateSettings = Field(default_factory=RateSettings)
    approx: ApproxSettings = Field(default_factory=ApproxSettings)

    @model_validator(mode="after")
    def _known_version(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version} (expected {SCHEMA_VERSION})")
        return self


def load_config(path) -> ExperimentConfig:
    """Parse a config file; JSON syntax errors carry line and column."""
    text = Path(path).read_text()
    return ExperimentConfig.model_validate(json.loads(text))
