"""Service-layer operations: every endpoint and the CLI's direct mode call
these same functions with the same pydantic models."""
from __future__ import annotations

from .. import engine, metrics
from ..harness import ExperimentConfig, build_scenario
from ..policies import (
    DEFAULT_WEIGHTS,
    ElectrePolicy,
    SelectionContext,
    compute_criteria,
    make_policy,
)
from ..seeding import derive_rng, derive_seed
from ..topology import NodeKind, build_generic_topology, generate_as_topology
from .models import (
    AsTopologyRequest,
    CriteriaModel,
    DecideRequest,
    DecideResponse,
    SimulateRequest,
    TopologyModel,
)


def topology_generic() -> TopologyModel:
    return TopologyModel.from_topology(build_generic_topology())


def topology_as(req: AsTopologyRequest) -> TopologyModel:
    return TopologyModel.from_topology(generate_as_topology(req.seed, req.node_count))


def decide(req: DecideRequest) -> DecideResponse:
    topology = req.topology.to_topology()
    if req.candidates is None:
        candidates = tuple(n.id for n in topology.nodes_of_kind(NodeKind.FOG))
    else:
        candidates = tuple(sorted(req.candidates))
    ctx = SelectionContext(
        topology=topology,
        source=req.source,
        app="request",
        instructions=req.instructions,
        bytes=req.bytes,
        candidates=candidates,
        node_load=lambda node: float(req.loads.get(node, 0.0)),
    )
    criteria = {c: compute_criteria(ctx, c) for c in candidates}
    weights = tuple(req.weights) if req.weights else DEFAULT_WEIGHTS
    tiers = None
    if req.policy == "electre":
        policy = ElectrePolicy(weights=weights)
        decision = policy.decide(ctx)
        chosen, tie = decision.chosen, decision.tie
        tiers = decision.tiers
    else:
        policy = make_policy(req.policy, rng=derive_rng(req.seed, "decide"))
        chosen, tie = policy.choose(ctx), False
    return DecideResponse(
        chosen=chosen,
        tie=tie,
        tiers=tiers,
        criteria={
            c: CriteriaModel(
                hop_count=v.hop_count,
                propagation=v.propagation,
                processing=v.processing,
                execution=v.execution,
                waiting=v.waiting,
            )
            for c, v in criteria.items()
        },
    )


def simulate(req: SimulateRequest) -> dict:
    config = ExperimentConfig(
        scenario=req.scenario,
        policies=[req.policy],
        durations=[int(req.duration)],
        seeds=[req.seed],
        arrival_scale=req.arrival_scale,
        weights=list(req.weights) if req.weights else None,
        as_node_count=req.as_node_count,
    )
    topology, apps, placement = build_scenario(config, req.seed)
    policy_options: dict = {}
    if req.policy == "electre":
        policy_options["weights"] = tuple(req.weights) if req.weights else DEFAULT_WEIGHTS
    log = engine.run(
        topology,
        apps,
        placement,
        req.policy,
        req.duration,
        req.seed,
        arrival_scale=req.arrival_scale,
        collect_records=False,
        bucket_width=req.bucket,
        scenario=req.scenario,
        policy_options=policy_options,
    )
    return metrics.build_summary(log)
