"""Request/response models for the HTTP API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from ..harness import ExperimentConfig


class HealthResponse(BaseModel):
    status: str = "ok"
    name: str = "pidlab"
    version: str


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    mode: Literal["open", "closed"] = "closed"
    # open loop: constant step amplitudes per input channel
    steps: list[float] | None = None
    # closed loop: two [kp, ki, kd] triples; falls back to config.gains
    gains: list[list[float]] | None = None


class SimulateResponse(BaseModel):
    mode: str
    csv: str
    diverged: bool
    indices: dict[str, float] | None = None
    step_stats: list[dict] | None = None


class TuneZnRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    methods: list[Literal["zn-open", "zn-closed"]] = ["zn-open", "zn-closed"]


class TuneZnResponse(BaseModel):
    # per method: {"status": "ok", "tuning": [...], "gains": [...]} or
    # {"status": "failed", "error": ...}
    methods: dict[str, dict]


class TunePsoRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    index: Literal["iae", "ise", "itse"] | None = None
    seed: int | None = None


class TunePsoResponse(BaseModel):
    index: str
    seed: int
    gains_vector: list[float]
    gains: list[dict]
    objective_value: float
    history: list[float]
    convergence_csv: str
    indices: dict[str, float]
    step_stats: list[dict]


class IdentifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    channels: list[int] = [0, 1]
    # trajectory CSV (k,t,u1,u2,y1,y2); generated from the config when omitted
    csv: str | None = None


class IdentifyResponse(BaseModel):
    results: list[dict]
    io_csv: str | None = None


class CompareRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)


class CompareResponse(BaseModel):
    report: dict
    files: dict[str, str]


class RenderTablesRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    report: dict


class RenderTablesResponse(BaseModel):
    tables_md: str


class ErrorResponse(BaseModel):
    error: str
    detail: str
