"""Experiment configuration: a JSON document validated with pydantic.

Node indices are 0-based. A graph edge ``[j, i]`` (or ``[j, i, weight]``)
means node ``i`` receives from node ``j``. Regressor matrices ``A`` and
``C`` are given by their diagonals. See ``ExperimentConfig.model_json_schema()``
for the complete field list.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GraphSpec(_Model):
    edges: list[list[float]] = Field(description="[sender, receiver] or [sender, receiver, weight]")
    weight: Optional[float] = Field(None, description="weight for edges given without one")

    @field_validator("edges")
    @classmethod
    def _edge_shape(cls, v):
        for e in v:
            if len(e) not in (2, 3):
                raise ValueError("edges are [sender, receiver] or [sender, receiver, weight]")
            if e[0] != int(e[0]) or e[1] != int(e[1]):
                raise ValueError("edge endpoints must be integers")
        return v


class EnsembleSpec(_Model):
    graphs: list[GraphSpec]
    transition: list[list[float]]
    initial: Optional[list[float]] = Field(None, description="defaults to uniform")


class BoxSpec(_Model):
    lower: list[float]
    upper: list[float]


class NoiseSpec(_Model):
    measurement_std: float = Field(gt=0)
    channel_std: float = Field(gt=0)


class RegressorSpec(_Model):
    A: list[float]
    B: list[float]
    C: list[float]
    x0: list[float]
    halfwidth: float = Field(0.0, ge=0)


class EncoderSpec(_Model):
    schedule: Union[Literal["cyclic-basis"], list[list[float]]] = "cyclic-basis"
    h_psi: Optional[int] = Field(None, ge=1, description="defaults to the schedule period")


class GainSpec(_Model):
    beta: float = Field(gt=0)
    gamma: float = Field(gt=0)
    p: float = Field(1.0, gt=0.5, le=1.0)


class InitialSpec(_Model):
    theta: Optional[list[float]] = Field(None, description="defaults to the box centre")
    ene: Optional[list[float]] = Field(None, description="defaults to the box centre")


class ChannelThreshold(_Model):
    sender: int
    receiver: int
    threshold: float


class ExperimentConfig(_Model):
    dimension: int = Field(ge=1)
    nodes: int = Field(ge=1)
    ensemble: EnsembleSpec
    theta: list[float]
    box: BoxSpec
    sensor_thresholds: Union[float, list[float]]
    channel_threshold: float = 0.0
    channel_overrides: list[ChannelThreshold] = Field(default_factory=list)
    noise: NoiseSpec
    regressors: list[RegressorSpec]
    phi_bar: float = Field(gt=0, description="configured regressor norm bound; realized max is monitored")
    excitation_window: int = Field(1, ge=1)
    excitation_horizon: int = Field(1000, ge=1, description="window starts scanned by validation")
    encoder: EncoderSpec = Field(default_factory=EncoderSpec)
    gains: GainSpec
    initial: InitialSpec = Field(default_factory=InitialSpec)
    horizon: int = Field(ge=1)
    reps: int = Field(1, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    baseline: bool = False
    rate_window: Optional[tuple[int, int]] = None

    @model_validator(mode="after")
    def _shapes(self):
        n, m = self.dimension, self.nodes
        problems = []
        if len(self.theta) != n:
            problems.append("theta length != dimension")
        if len(self.box.lower) != n or len(self.box.upper) != n:
            problems.append("box bounds length != dimension")
        if isinstance(self.sensor_thresholds, list) and len(self.sensor_thresholds) != m:
            problems.append("sensor_thresholds length != nodes")
        if len(self.regressors) != m:
            problems.append("need one regressor spec per node")
        for r in self.regressors:
            if not (len(r.A) == len(r.B) == len(r.C) == len(r.x0) == n):
                problems.append("regressor vectors must have length dimension")
                break
        s = len(self.ensemble.graphs)
        P = self.ensemble.transition
        if len(P) != s or any(len(row) != s for row in P):
            problems.append("transition matrix must be s x s")
        for g in self.ensemble.graphs:
            for e in g.edges:
                if not (0 <= e[0] < m and 0 <= e[1] < m):
                    problems.append("edge endpoint out of range")
                    break
        if isinstance(self.encoder.schedule, list):
            if any(len(v) != n for v in self.encoder.schedule) or not self.encoder.schedule:
                problems.append("encoder vectors must have length dimension")
        for init in (self.initial.theta, self.initial.ene):
            if init is not None and len(init) != n:
                problems.append("initial values must have length dimension")
        if self.rate_window is not None:
            lo, hi = self.rate_window
            if not (1 <= lo < hi):
                problems.append("rate_window needs 1 <= lo < hi")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    # convenience accessors

    def sensor_threshold_vector(self) -> np.ndarray:
        if isinstance(self.sensor_thresholds, list):
            return np.array(self.sensor_thresholds, dtype=float)
        return np.full(self.nodes, float(self.sensor_thresholds))

    def channel_threshold_for(self, receiver: int, sender: int) -> float:
        for o in self.channel_overrides:
            if o.receiver == receiver and o.sender == sender:
                return o.threshold
        return self.channel_threshold

    def effective_rate_window(self) -> tuple[int, int]:
        if self.rate_window is not None:
            lo, hi = self.rate_window
            return lo, min(hi, self.horizon)
        lo = min(1000, max(1, self.horizon // 10))
        return lo, self.horizon

    def with_overrides(self, **kw) -> "ExperimentConfig":
        data = self.model_dump()
        data.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig.model_validate(data)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    return ExperimentConfig.model_validate(json.loads(text))


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=False)
