"""Pydantic request/response models shared by the HTTP API and the CLI."""
from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field, model_validator

from ..topology import Link, Node, NodeKind, Topology

PolicyName = Literal["random", "drr", "nearest", "fastest", "electre"]


class NodeModel(BaseModel):
    id: int
    kind: Literal["cloud", "fog", "iot"]
    ipt: float
    ram: int = 4000


class LinkModel(BaseModel):
    a: int
    b: int
    bw: float
    pr: float


class TopologyModel(BaseModel):
    nodes: list[NodeModel]
    links: list[LinkModel]

    @classmethod
    def from_topology(cls, topology: Topology) -> "TopologyModel":
        return cls.model_validate(topology.to_dict())

    def to_topology(self) -> Topology:
        return Topology(
            [Node(n.id, NodeKind(n.kind), n.ipt, n.ram) for n in self.nodes],
            [Link(l.a, l.b, l.bw, l.pr) for l in self.links],
        )


class AsTopologyRequest(BaseModel):
    seed: int = 1
    node_count: int = Field(default=32, ge=10)


class CriteriaModel(BaseModel):
    hop_count: int
    propagation: float
    processing: float
    execution: float
    waiting: float


class DecideRequest(BaseModel):
    """One service-selection decision against an explicit load snapshot."""

    topology: TopologyModel
    source: int
    instructions: float = Field(gt=0)
    bytes: float = Field(gt=0)
    policy: PolicyName = "electre"
    candidates: list[int] | None = None  # default: every fog node
    loads: dict[int, float] = Field(default_factory=dict)  # pending instructions
    weights: list[float] | None = None
    seed: int = 1  # for the random policy

    @model_validator(mode="after")
    def _check_weights(self) -> "DecideRequest":
        if self.weights is not None:
            if len(self.weights) != 5 or any(w <= 0 for w in self.weights):
                raise ValueError("weights must be 5 positive values")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                raise ValueError("weights must sum to 1")
        return self


class DecideResponse(BaseModel):
    chosen: int
    tie: bool
    tiers: list[list[int]] | None = None
    criteria: dict[int, CriteriaModel]


class SimulateRequest(BaseModel):
    scenario: Literal["generic", "as"] = "generic"
    policy: PolicyName = "electre"
    duration: float = Field(default=10_000, gt=0)
    seed: int = 1
    arrival_scale: float = Field(default=100.0, ge=1)
    weights: list[float] | None = None
    as_node_count: int = Field(default=32, ge=10)
    bucket: float | None = None


class SimulateResponse(BaseModel):
    summary: dict[str, Any]


class ExperimentRequest(BaseModel):
    scenario: Literal["generic", "as"] = "generic"
    policies: list[PolicyName] = Field(default_factory=lambda: ["electre"])
    durations: list[float] = Field(default_factory=lambda: [10_000.0])
    seed_count: int = Field(default=10, ge=1)
    master_seed: int = 1
    arrival_scale: float = Field(default=100.0, ge=1)
    weights: list[float] | None = None
    out_dir: str | None = None  # server-side directory; default under data dir
    dump_decisions: bool = False
    dump_events: bool = False
    bucket: float | None = None
    per_message_csv: bool | None = None


class ExperimentStatus(BaseModel):
    id: str
    state: Literal["running", "done", "failed"]
    runs_total: int
    runs_finished: int
    out_dir: str
    error: str | None = None
    summaries: list[dict[str, Any]] | None = None
    comparison: dict[str, Any] | None = None


class CompareRequest(BaseModel):
    summaries: list[dict[str, Any]]


class CompareResponse(BaseModel):
    report: dict[str, Any]
    text: str
