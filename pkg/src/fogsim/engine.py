"""Deterministic discrete-event simulation of the Fog network.

One run executes a single logical timeline: workload generation per
(device, application) stream, FCFS transmission on each directed link half,
FCFS single-server compute at Fog/Cloud nodes, and DAG-driven message
triggering. A message occupies a link half for bytes/bw + pr (the time for
the whole message to reach the far side), which is what lets long slow links
congest under load. Events are ordered by (timestamp, insertion sequence) so
identical seeds replay identically.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Callable

from .policies import ElectrePolicy, Policy, SelectionContext, make_policy
from .seeding import derive_rng
from .topology import NodeKind, Path, Topology
from .workload import (
    Application,
    ArrivalProcess,
    MessageSpec,
    ModuleKind,
    Placement,
    WorkloadError,
    sample_inter_arrival,
)

# message lifecycle states
CREATED = 0
LINK_QUEUED = 1
TRANSMITTING = 2
NODE_QUEUED = 4
IN_SERVICE = 5
DONE = 6

STATUS_NAMES = {
    LINK_QUEUED: "link_queued",
    TRANSMITTING: "transmitting",
    NODE_QUEUED: "node_queued",
    IN_SERVICE: "in_service",
}

# event kinds
_GENERATE = 0
_LINK_DONE = 1
_SERVICE_DONE = 3


class EngineError(ValueError):
    pass


class Message:
    """A workload instance in flight, carrying its lifecycle timestamps."""

    __slots__ = (
        "id",
        "app",
        "spec",
        "src",
        "dst",
        "origin",
        "ancestor",
        "acc_delay",
        "path",
        "hop",
        "created",
        "link_enter",
        "link_wait",
        "tx_time",
        "prop_time",
        "node_enter",
        "service_start",
        "service_end",
        "status",
    )

    def __init__(
        self,
        msg_id: int,
        app: str,
        spec: MessageSpec,
        src: int,
        dst: int,
        origin: int,
        ancestor: int,
        acc_delay: float,
        path: Path,
        created: float,
    ):
        self.id = msg_id
        self.app = app
        self.spec = spec
        self.src = src
        self.dst = dst
        self.origin = origin
        self.ancestor = ancestor
        self.acc_delay = acc_delay
        self.path = path
        self.hop = 0
        self.created = created
        self.link_enter = 0.0
        self.link_wait = 0.0
        self.tx_time = 0.0
        self.prop_time = 0.0
        self.node_enter = math.nan
        self.service_start = math.nan
        self.service_end = math.nan
        self.status = CREATED

    @property
    def latency(self) -> float:
        return self.link_wait + self.tx_time + self.prop_time

    @property
    def waiting(self) -> float:
        if math.isnan(self.service_start):
            return 0.0
        return self.service_start - self.node_enter

    @property
    def service(self) -> float:
        if math.isnan(self.service_end):
            return 0.0
        return self.service_end - self.service_start

    @property
    def response(self) -> float:
        return self.waiting + self.service

    @property
    def total_response(self) -> float:
        return self.response + self.latency


class LinkHalf:
    __slots__ = ("key", "bw", "pr", "queue", "busy")

    def __init__(self, key: tuple[int, int], bw: float, pr: float):
        self.key = key
        self.bw = bw
        self.pr = pr
        self.queue: deque[Message] = deque()
        self.busy = False


class NodeServer:
    __slots__ = ("node", "ipt", "queue", "busy", "current", "pending")

    def __init__(self, node: int, ipt: float):
        self.node = node
        self.ipt = ipt
        self.queue: deque[Message] = deque()
        self.busy = False
        self.current: Message | None = None
        # instructions assigned to this node and not yet served: the load the
        # balancer's monitoring system sees (includes requests still in transit)
        self.pending = 0.0


class Agg:
    """Streaming count/mean/population-std accumulator."""

    __slots__ = ("n", "total", "sq")

    def __init__(self):
        self.n = 0
        self.total = 0.0
        self.sq = 0.0

    def add(self, x: float) -> None:
        self.n += 1
        self.total += x
        self.sq += x * x

    @property
    def mean(self) -> float:
        return self.total / self.n if self.n else 0.0

    @property
    def std(self) -> float:
        if not self.n:
            return 0.0
        var = self.sq / self.n - self.mean**2
        return math.sqrt(var) if var > 0 else 0.0

    def to_dict(self) -> dict:
        return {"count": self.n, "mean": self.mean, "std": self.std}


COMPONENTS = ("latency", "waiting", "service", "response", "total_response")


@dataclass
class RunLog:
    """Everything observable from one run; metrics derives the summary."""

    scenario: str
    policy: str
    duration: float
    seed: int
    arrival_scale: float
    generated: dict = field(default_factory=dict)  # (app, spec) -> int
    transmitted: dict = field(default_factory=dict)
    completed: dict = field(default_factory=dict)
    assignments: dict = field(default_factory=dict)  # (app, dst node) -> int
    served: dict = field(default_factory=dict)  # (node, app, spec) -> int
    busy_time: dict = field(default_factory=dict)  # (node, app, spec) -> float
    delays: dict = field(default_factory=dict)  # (app, spec) -> {component: Agg}
    loop_delays: dict = field(default_factory=dict)  # (app, loop idx) -> Agg
    loop_bytes: dict = field(default_factory=dict)  # (app, loop idx) -> float
    pending_end: dict = field(default_factory=dict)  # (app, spec, status) -> int
    saturation: dict = field(default_factory=dict)
    electre_decisions: int = 0
    electre_ties: int = 0
    records: list[Message] | None = None
    audit: list | None = None
    decision_log: list | None = None
    buckets: dict = field(default_factory=dict)  # bucket idx -> {comp: Agg}
    bucket_width: float | None = None


class Simulation:
    def __init__(
        self,
        topology: Topology,
        applications: list[Application],
        placement: Placement,
        policy: Policy | str,
        duration: float,
        seed: int,
        arrival_scale: float = 100.0,
        service_time_mode: str = "deterministic",
        collect_records: bool = True,
        audit: bool = False,
        decision_dump: bool = False,
        bucket_width: float | None = None,
        scenario: str = "custom",
        policy_options: dict | None = None,
    ):
        if duration <= 0:
            raise EngineError("duration must be positive")
        if service_time_mode not in ("deterministic", "exponential"):
            raise EngineError(f"unknown service_time_mode {service_time_mode!r}")
        placement.validate(topology, applications)
        self.topology = topology
        self.applications = list(applications)
        self.placement = placement
        self.duration = float(duration)
        self.seed = seed
        self.arrival = ArrivalProcess(scale=arrival_scale)
        self.service_time_mode = service_time_mode
        if isinstance(policy, str):
            policy = make_policy(
                policy, rng=derive_rng(seed, "policy", policy), **(policy_options or {})
            )
        self.policy = policy

        self.clock = 0.0
        self._heap: list = []
        self._seq = 0
        self._next_msg_id = 0
        self._live: dict[int, Message] = {}

        self.halves: dict[tuple[int, int], LinkHalf] = {}
        for link in topology.links.values():
            self.halves[(link.a, link.b)] = LinkHalf((link.a, link.b), link.bw, link.pr)
            self.halves[(link.b, link.a)] = LinkHalf((link.b, link.a), link.bw, link.pr)
        self.servers: dict[int, NodeServer] = {
            n.id: NodeServer(n.id, n.ipt)
            for n in topology.nodes.values()
            if n.kind != NodeKind.IOT
        }

        self._trigger_rng = derive_rng(seed, "trigger")
        self._service_rng = derive_rng(seed, "service")

        self.log = RunLog(
            scenario=scenario,
            policy=self.policy.name,
            duration=self.duration,
            seed=seed,
            arrival_scale=arrival_scale,
            records=[] if collect_records else None,
            audit=[] if audit else None,
            decision_log=[] if decision_dump else None,
            bucket_width=bucket_width,
        )

        self._prepare_applications()

    # ------------------------------------------------------------ wiring

    def _prepare_applications(self) -> None:
        self._entry: dict[str, tuple[MessageSpec, tuple[int, ...], tuple[int, ...]]] = {}
        self._route_of: dict[tuple[str, str], tuple[str, int | None]] = {}
        self._outbound: dict[tuple[str, str], tuple[MessageSpec, ...]] = {}
        self._loops_last: dict[tuple[str, str], tuple[int, ...]] = {}
        self._loops_member: dict[tuple[str, str], tuple[int, ...]] = {}
        self._apps = {app.name: app for app in self.applications}
        for app in self.applications:
            module_kind = {m.name: m.kind for m in app.modules}
            sources = app.source_modules()
            if len(sources) != 1:
                raise EngineError(f"{app.name}: exactly one source module supported")
            outbound = app.outbound(sources[0].name)
            if len(outbound) != 1:
                raise EngineError(f"{app.name}: source module must emit exactly one message")
            entry = outbound[0]
            devices = self.placement.of(app.name, sources[0].name)
            candidates = self.placement.of(app.name, entry.to_module)
            if not candidates:
                raise EngineError(f"{app.name}: no replicas for {entry.to_module}")
            self._entry[app.name] = (entry, devices, candidates)
            for spec in app.messages:
                kind = module_kind[spec.to_module]
                if spec is entry:
                    continue
                if kind == ModuleKind.SINK:
                    self._route_of[(app.name, spec.name)] = ("origin", None)
                else:
                    replicas = self.placement.of(app.name, spec.to_module)
                    if len(replicas) != 1:
                        raise EngineError(
                            f"{app.name}/{spec.name}: downstream compute module "
                            f"{spec.to_module} must have exactly one replica"
                        )
                    self._route_of[(app.name, spec.name)] = ("node", replicas[0])
            for module in app.modules:
                self._outbound[(app.name, module.name)] = app.outbound(module.name)
            for spec in app.messages:
                last, member = [], []
                for idx, loop in enumerate(app.loops):
                    if loop and loop[-1] == spec.name:
                        last.append(idx)
                    if spec.name in loop:
                        member.append(idx)
                self._loops_last[(app.name, spec.name)] = tuple(last)
                self._loops_member[(app.name, spec.name)] = tuple(member)
            # warm the routing cache so runs do not pay for it mid-stream
            for device in devices:
                for cand in candidates:
                    self.topology.route(device, cand)

    # ------------------------------------------------------------ events

    def _push(self, time: float, kind: int, payload) -> None:
        heappush(self._heap, (time, self._seq, kind, payload))
        self._seq += 1

    def run(self) -> RunLog:
        for app in self.applications:
            entry, devices, _ = self._entry[app.name]
            for device in devices:
                rng = derive_rng(self.seed, "arrival", device, app.name)
                start = sample_inter_arrival(self.arrival, rng)
                if start <= self.duration:
                    self._push(float(start), _GENERATE, (device, app.name, rng))
        heap = self._heap
        duration = self.duration
        while heap:
            time, _, kind, payload = heappop(heap)
            if time > duration:
                break
            self.clock = time
            if kind == _GENERATE:
                self._handle_generate(time, payload)
            elif kind == _LINK_DONE:
                self._handle_link_done(time, payload)
            else:
                self._handle_service_done(time, payload)
        self._drain()
        if isinstance(self.policy, ElectrePolicy):
            self.log.electre_decisions = self.policy.decisions
            self.log.electre_ties = self.policy.ties
        return self.log

    def _handle_generate(self, time: float, payload) -> None:
        device, app_name, rng = payload
        entry, _, candidates = self._entry[app_name]
        ctx = SelectionContext(
            topology=self.topology,
            source=device,
            app=app_name,
            instructions=entry.instructions,
            bytes=entry.bytes,
            candidates=candidates,
            node_load=self._node_load,
        )
        if self.log.decision_log is not None and isinstance(self.policy, ElectrePolicy):
            decision = self.policy.decide(ctx)
            dst = decision.chosen
            record = {"time": time, "device": device, "app": app_name}
            record.update(decision.to_dict())
            self.log.decision_log.append(record)
        else:
            dst = self.policy.choose(ctx)
            if self.log.decision_log is not None:
                self.log.decision_log.append(
                    {
                        "time": time,
                        "device": device,
                        "app": app_name,
                        "candidates": list(candidates),
                        "chosen": dst,
                    }
                )
        msg = self._create_message(
            app_name, entry, src=device, dst=dst, origin=device, ancestor=None,
            acc_delay=0.0, time=time,
        )
        key = (app_name, dst)
        self.log.assignments[key] = self.log.assignments.get(key, 0) + 1
        self._dispatch(msg, time)
        gap = sample_inter_arrival(self.arrival, rng)
        nxt = time + gap
        if nxt <= self.duration:
            self._push(nxt, _GENERATE, (device, app_name, rng))

    def _create_message(
        self,
        app_name: str,
        spec: MessageSpec,
        src: int,
        dst: int,
        origin: int,
        ancestor: int | None,
        acc_delay: float,
        time: float,
    ) -> Message:
        msg = Message(
            msg_id=self._next_msg_id,
            app=app_name,
            spec=spec,
            src=src,
            dst=dst,
            origin=origin,
            ancestor=self._next_msg_id if ancestor is None else ancestor,
            acc_delay=acc_delay,
            path=self.topology.route(src, dst),
            created=time,
        )
        self._next_msg_id += 1
        self._live[msg.id] = msg
        server = self.servers.get(dst)
        if server is not None:
            server.pending += spec.instructions
        key = (app_name, spec.name)
        self.log.generated[key] = self.log.generated.get(key, 0) + 1
        if self.log.audit is not None:
            self.log.audit.append(("gen", msg.id, app_name, spec.name, src, dst, time))
        return msg

    def _dispatch(self, msg: Message, time: float) -> None:
        if not msg.path.links:
            self._deliver(msg, time)
        else:
            nodes = msg.path.nodes
            self._enqueue_link(msg, self.halves[(nodes[0], nodes[1])], time)

    def _enqueue_link(self, msg: Message, half: LinkHalf, time: float) -> None:
        msg.link_enter = time
        msg.status = LINK_QUEUED
        if half.busy:
            half.queue.append(msg)
        else:
            self._start_tx(msg, half, time)

    def _start_tx(self, msg: Message, half: LinkHalf, time: float) -> None:
        # the half is held until the whole message reaches the far side
        half.busy = True
        tx = msg.spec.bytes / half.bw
        msg.link_wait += time - msg.link_enter
        msg.tx_time += tx
        msg.prop_time += half.pr
        msg.status = TRANSMITTING
        end = time + tx + half.pr
        self._push(end, _LINK_DONE, (half, msg))
        if self.log.audit is not None:
            self.log.audit.append(("link", half.key, msg.id, msg.link_enter, time, end))

    def _handle_link_done(self, time: float, payload) -> None:
        half, msg = payload
        half.busy = False
        if half.queue:
            self._start_tx(half.queue.popleft(), half, time)
        msg.hop += 1
        if msg.hop == 1:
            key = (msg.app, msg.spec.name)
            self.log.transmitted[key] = self.log.transmitted.get(key, 0) + 1
            bts = msg.spec.bytes
            for loop_idx in self._loops_member[key]:
                lkey = (msg.app, loop_idx)
                self.log.loop_bytes[lkey] = self.log.loop_bytes.get(lkey, 0.0) + bts
        nodes = msg.path.nodes
        if msg.hop < len(msg.path.links):
            self._enqueue_link(msg, self.halves[(nodes[msg.hop], nodes[msg.hop + 1])], time)
        else:
            self._deliver(msg, time)

    def _deliver(self, msg: Message, time: float) -> None:
        server = self.servers.get(msg.dst)
        if server is None:
            # sink consumption at an IoT device: no compute, no queueing
            self._complete(msg, time)
            return
        msg.node_enter = time
        msg.status = NODE_QUEUED
        if server.busy:
            server.queue.append(msg)
        else:
            self._start_service(server, msg, time)

    def _start_service(self, server: NodeServer, msg: Message, time: float) -> None:
        server.busy = True
        server.current = msg
        msg.service_start = time
        msg.status = IN_SERVICE
        mean = msg.spec.instructions / server.ipt
        if self.service_time_mode == "exponential":
            dur = self._service_rng.expovariate(1.0 / mean)
        else:
            dur = mean
        self._push(time + dur, _SERVICE_DONE, server)

    def _handle_service_done(self, time: float, server: NodeServer) -> None:
        msg = server.current
        server.current = None
        server.busy = False
        msg.service_end = time
        server.pending -= msg.spec.instructions
        skey = (server.node, msg.app, msg.spec.name)
        self.log.served[skey] = self.log.served.get(skey, 0) + 1
        self.log.busy_time[skey] = self.log.busy_time.get(skey, 0.0) + msg.service
        if self.log.audit is not None:
            self.log.audit.append(
                ("node", server.node, msg.id, msg.node_enter, msg.service_start, time)
            )
        self._complete(msg, time)
        self._emit_triggered(msg, server.node, time)
        if server.queue:
            self._start_service(server, server.queue.popleft(), time)

    def _emit_triggered(self, parent: Message, node: int, time: float) -> None:
        served_module = parent.spec.to_module
        for spec in self._outbound[(parent.app, served_module)]:
            if spec.trigger_fraction < 1.0 and self._trigger_rng.random() >= spec.trigger_fraction:
                continue
            mode, target = self._route_of[(parent.app, spec.name)]
            dst = parent.origin if mode == "origin" else target
            child = self._create_message(
                parent.app,
                spec,
                src=node,
                dst=dst,
                origin=parent.origin,
                ancestor=parent.ancestor,
                acc_delay=parent.acc_delay + parent.total_response,
                time=time,
            )
            self._dispatch(child, time)

    def _complete(self, msg: Message, time: float) -> None:
        msg.status = DONE
        del self._live[msg.id]
        key = (msg.app, msg.spec.name)
        self.log.completed[key] = self.log.completed.get(key, 0) + 1
        comps = self.log.delays.get(key)
        if comps is None:
            comps = {c: Agg() for c in COMPONENTS}
            self.log.delays[key] = comps
        comps["latency"].add(msg.latency)
        comps["waiting"].add(msg.waiting)
        comps["service"].add(msg.service)
        comps["response"].add(msg.response)
        comps["total_response"].add(msg.total_response)
        for loop_idx in self._loops_last[key]:
            lkey = (msg.app, loop_idx)
            agg = self.log.loop_delays.get(lkey)
            if agg is None:
                agg = Agg()
                self.log.loop_delays[lkey] = agg
            agg.add(msg.acc_delay + msg.total_response)
        if self.log.bucket_width:
            bucket = int(time // self.log.bucket_width)
            baggs = self.log.buckets.get(bucket)
            if baggs is None:
                baggs = {"latency": Agg(), "total_response": Agg()}
                self.log.buckets[bucket] = baggs
            baggs["latency"].add(msg.latency)
            baggs["total_response"].add(msg.total_response)
        if self.log.records is not None:
            self.log.records.append(msg)

    def _node_load(self, node: int) -> float:
        return self.servers[node].pending

    # ------------------------------------------------------------ drain

    def _drain(self) -> None:
        pending: dict[tuple[str, str, str], int] = {}
        status_totals = {name: 0 for name in STATUS_NAMES.values()}
        for msg in self._live.values():
            name = STATUS_NAMES[msg.status]
            key = (msg.app, msg.spec.name, name)
            pending[key] = pending.get(key, 0) + 1
            status_totals[name] += 1
            if self.log.records is not None:
                self.log.records.append(msg)
        self.log.pending_end = pending
        self.log.saturation = {
            "link_waiting": status_totals["link_queued"],
            "link_transmitting": status_totals["transmitting"],
            "node_waiting": status_totals["node_queued"],
            "node_in_service": status_totals["in_service"],
        }
        # utilization: count the slice of any service still running at the end
        for server in self.servers.values():
            if server.busy and server.current is not None:
                msg = server.current
                skey = (server.node, msg.app, msg.spec.name)
                self.log.busy_time[skey] = (
                    self.log.busy_time.get(skey, 0.0) + self.duration - msg.service_start
                )


def run(
    topology: Topology,
    applications: list[Application],
    placement: Placement,
    policy: Policy | str,
    duration: float,
    seed: int,
    **options,
) -> RunLog:
    """Simulate from t=0 to t=duration and return the complete metrics log."""
    return Simulation(
        topology, applications, placement, policy, duration, seed, **options
    ).run()


def drain_status(log: RunLog) -> dict:
    """End-of-run backlog: messages still waiting for links and nodes."""
    return dict(log.saturation)
