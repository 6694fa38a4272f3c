"""The five service-selection policies and the criteria vectors they share.

All policies pick one replica node for a freshly generated workload. The
static criteria (hop count, propagation, processing, execution) are cached
per (source, request, candidate); only the waiting delay is read live.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from . import electre
from .topology import Topology


class PolicyError(ValueError):
    pass


POLICY_NAMES = ("random", "drr", "nearest", "fastest", "electre")

DEFAULT_WEIGHTS = (0.2, 0.2, 0.2, 0.2, 0.2)


@dataclass(frozen=True)
class CriteriaVector:
    """Selection criteria for one candidate, all to be minimized."""

    hop_count: int
    propagation: float
    processing: float
    execution: float
    waiting: float


@dataclass(frozen=True)
class SelectionContext:
    """Everything a policy may look at when placing one request."""

    topology: Topology
    source: int
    app: str
    instructions: float
    bytes: float
    candidates: tuple[int, ...]  # sorted node ids hosting the required replica
    node_load: Callable[[int], float]  # pending instructions at a node


def compute_criteria(ctx: SelectionContext, candidate: int) -> CriteriaVector:
    if candidate not in ctx.candidates:
        raise PolicyError(f"node {candidate} does not host the required replica")
    path = ctx.topology.route(ctx.source, candidate)
    ipt = ctx.topology.nodes[candidate].ipt
    propagation = path.propagation
    processing = ctx.instructions / ipt
    transmission = sum(ctx.bytes / link.bw for link in path.links)
    return CriteriaVector(
        hop_count=path.hops,
        propagation=propagation,
        processing=processing,
        execution=processing + propagation + transmission,
        waiting=ctx.node_load(candidate) / ipt,
    )


class Policy:
    name = "base"

    def choose(self, ctx: SelectionContext) -> int:
        raise NotImplementedError


class RandomPolicy(Policy):
    """Uniform choice per workload; the chosen node always accepts."""

    name = "random"

    def __init__(self, rng: random.Random):
        self.rng = rng

    def choose(self, ctx: SelectionContext) -> int:
        if not ctx.candidates:
            raise PolicyError("no candidates")
        return ctx.candidates[self.rng.randrange(len(ctx.candidates))]


class RoundRobinPolicy(Policy):
    """Distributed Round-Robin: each source cycles the candidate list in
    node-id order, one counter per (device, application) by default."""

    name = "drr"

    def __init__(self, scope: str = "device-app"):
        if scope not in ("device-app", "device"):
            raise PolicyError(f"unknown drr scope {scope!r}")
        self.scope = scope
        self.counters: dict[tuple, int] = {}

    def choose(self, ctx: SelectionContext) -> int:
        if not ctx.candidates:
            raise PolicyError("no candidates")
        key = (ctx.source, ctx.app) if self.scope == "device-app" else (ctx.source,)
        count = self.counters.get(key, 0)
        self.counters[key] = count + 1
        return ctx.candidates[count % len(ctx.candidates)]


class NearestPolicy(Policy):
    """Fewest hops to the source, then smallest propagation delay, then id."""

    name = "nearest"

    def __init__(self):
        self._cache: dict[tuple, int] = {}

    def choose(self, ctx: SelectionContext) -> int:
        if not ctx.candidates:
            raise PolicyError("no candidates")
        key = (ctx.source, ctx.candidates)
        chosen = self._cache.get(key)
        if chosen is None:
            chosen = min(
                ctx.candidates,
                key=lambda c: _distance_key(ctx.topology, ctx.source, c),
            )
            self._cache[key] = chosen
        return chosen


class FastestPolicy(Policy):
    """Smallest static execution delay (service time plus network latency);
    waiting delay is deliberately excluded. Ties fall back to nearest."""

    name = "fastest"

    def __init__(self):
        self._cache: dict[tuple, int] = {}

    def choose(self, ctx: SelectionContext) -> int:
        if not ctx.candidates:
            raise PolicyError("no candidates")
        key = (ctx.source, ctx.instructions, ctx.bytes, ctx.candidates)
        chosen = self._cache.get(key)
        if chosen is None:
            chosen = min(
                ctx.candidates,
                key=lambda c: (compute_criteria(ctx, c).execution,)
                + _distance_key(ctx.topology, ctx.source, c),
            )
            self._cache[key] = chosen
        return chosen


class ElectrePolicy(Policy):
    """Outranking selection on the five criteria; tie in the top tier falls
    back to the nearest candidate."""

    name = "electre"

    def __init__(
        self,
        weights: tuple[float, ...] = DEFAULT_WEIGHTS,
        discrimination: float = electre.DEFAULT_DISCRIMINATION,
        q_percentile: float = electre.DEFAULT_Q_PERCENTILE,
        p_percentile: float = electre.DEFAULT_P_PERCENTILE,
        v_percentile: float = electre.DEFAULT_V_PERCENTILE,
        q_divisor: float = electre.DEFAULT_Q_DIVISOR,
        on_decision: Callable[[electre.SelectionDecision], None] | None = None,
    ):
        self.weights = tuple(weights)
        self.discrimination = discrimination
        self.q_percentile = q_percentile
        self.p_percentile = p_percentile
        self.v_percentile = v_percentile
        self.q_divisor = q_divisor
        self.on_decision = on_decision
        self.decisions = 0
        self.ties = 0
        self._static: dict[tuple, tuple] = {}

    def _static_parts(self, ctx: SelectionContext) -> tuple:
        key = (ctx.source, ctx.instructions, ctx.bytes, ctx.candidates)
        parts = self._static.get(key)
        if parts is None:
            hops, prs, procs, execs, ipts, tie_keys = [], [], [], [], [], {}
            for cand in ctx.candidates:
                path = ctx.topology.route(ctx.source, cand)
                ipt = ctx.topology.nodes[cand].ipt
                processing = ctx.instructions / ipt
                transmission = sum(ctx.bytes / link.bw for link in path.links)
                hops.append(float(path.hops))
                prs.append(path.propagation)
                procs.append(processing)
                execs.append(processing + path.propagation + transmission)
                ipts.append(ipt)
                tie_keys[cand] = (path.hops, path.propagation)
            parts = (hops, prs, procs, execs, ipts, tie_keys)
            self._static[key] = parts
        return parts

    def choose(self, ctx: SelectionContext) -> int:
        decision = self.decide(ctx)
        return decision.chosen

    def decide(self, ctx: SelectionContext) -> electre.SelectionDecision:
        if not ctx.candidates:
            raise PolicyError("no candidates")
        hops, prs, procs, execs, ipts, tie_keys = self._static_parts(ctx)
        waits = [ctx.node_load(cand) / ipts[i] for i, cand in enumerate(ctx.candidates)]
        decision = electre.select_detailed(
            ctx.candidates,
            (hops, prs, procs, execs, waits),
            self.weights,
            tie_keys,
            discrimination=self.discrimination,
            q_percentile=self.q_percentile,
            p_percentile=self.p_percentile,
            v_percentile=self.v_percentile,
            q_divisor=self.q_divisor,
        )
        self.decisions += 1
        if decision.tie:
            self.ties += 1
        if self.on_decision is not None:
            self.on_decision(decision)
        return decision


def _distance_key(topology: Topology, source: int, candidate: int) -> tuple:
    path = topology.route(source, candidate)
    return (path.hops, path.propagation, candidate)


def select_random(ctx: SelectionContext, rng: random.Random) -> int:
    return RandomPolicy(rng).choose(ctx)


def select_nearest(ctx: SelectionContext) -> int:
    return NearestPolicy().choose(ctx)


def select_fastest(ctx: SelectionContext) -> int:
    return FastestPolicy().choose(ctx)


def select_electre(ctx: SelectionContext, weights: tuple[float, ...] = DEFAULT_WEIGHTS) -> int:
    return ElectrePolicy(weights).choose(ctx)


def make_policy(
    name: str,
    rng: random.Random | None = None,
    weights: tuple[float, ...] = DEFAULT_WEIGHTS,
    drr_scope: str = "device-app",
    on_decision: Callable[[electre.SelectionDecision], None] | None = None,
    **electre_options,
) -> Policy:
    if name == "random":
        if rng is None:
            raise PolicyError("random policy needs an rng")
        return RandomPolicy(rng)
    if name == "drr":
        return RoundRobinPolicy(scope=drr_scope)
    if name == "nearest":
        return NearestPolicy()
    if name == "fastest":
        return FastestPolicy()
    if name == "electre":
        return ElectrePolicy(weights=weights, on_decision=on_decision, **electre_options)
    raise PolicyError(f"unknown policy {name!r}")
