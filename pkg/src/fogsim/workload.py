"""Distributed application workflows, module placement, and the stochastic
workload generator (integer-rounded exponential inter-arrivals).
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum

from .topology import NodeKind, Topology

DEFAULT_ARRIVAL_SCALE = 100.0

# (instructions, bytes) per application: light, moderate, resource-demanding.
DEFAULT_APP_TIERS = ((100, 10), (1000, 100), (10_000, 1000))

FOG_DOWN_FRACTION = 1.0
FOG_UP_FRACTION = 0.1
CLOUD_FRACTION = 0.5


class WorkloadError(ValueError):
    pass


class ModuleKind(str, Enum):
    SOURCE = "source"
    COMPUTE = "compute"
    SINK = "sink"


@dataclass(frozen=True)
class AppModule:
    name: str
    kind: ModuleKind
    ram: int = 10


@dataclass(frozen=True)
class MessageSpec:
    """One dependency in the application DAG: a message class carrying a
    compute demand (instructions) and a network demand (bytes)."""

    name: str
    from_module: str
    to_module: str
    instructions: float
    bytes: float
    trigger_fraction: float = 1.0

    def __post_init__(self) -> None:
        if self.bytes <= 0:
            raise WorkloadError(f"message {self.name}: bytes must be positive")
        if not 0.0 <= self.trigger_fraction <= 1.0:
            raise WorkloadError(f"message {self.name}: trigger_fraction outside [0,1]")


@dataclass(frozen=True)
class Application:
    name: str
    modules: tuple[AppModule, ...]
    messages: tuple[MessageSpec, ...]
    loops: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self) -> None:
        names = [m.name for m in self.modules]
        if len(set(names)) != len(names):
            raise WorkloadError(f"{self.name}: duplicate module names")
        by_module = {m.name: m for m in self.modules}
        specs = {s.name: s for s in self.messages}
        if len(specs) != len(self.messages):
            raise WorkloadError(f"{self.name}: duplicate message names")
        for spec in self.messages:
            if spec.from_module not in by_module or spec.to_module not in by_module:
                raise WorkloadError(f"{self.name}: message {spec.name} references unknown module")
            if by_module[spec.to_module].kind == ModuleKind.COMPUTE and spec.instructions <= 0:
                raise WorkloadError(
                    f"{self.name}: message {spec.name} needs instructions > 0 for a compute module"
                )
            if by_module[spec.from_module].kind == ModuleKind.SINK:
                raise WorkloadError(f"{self.name}: sink module {spec.from_module} cannot emit")
            if by_module[spec.to_module].kind == ModuleKind.SOURCE:
                raise WorkloadError(f"{self.name}: source module {spec.to_module} cannot consume")
        self._check_acyclic()
        for loop in self.loops:
            if not loop:
                raise WorkloadError(f"{self.name}: empty loop")
            for name in loop:
                if name not in specs:
                    raise WorkloadError(f"{self.name}: loop references unknown message {name}")
            for first, second in zip(loop, loop[1:]):
                if specs[first].to_module != specs[second].from_module:
                    raise WorkloadError(f"{self.name}: loop {loop} is not a connected chain")

    def _check_acyclic(self) -> None:
        out_edges: dict[str, list[str]] = {m.name: [] for m in self.modules}
        indegree = {m.name: 0 for m in self.modules}
        for spec in self.messages:
            out_edges[spec.from_module].append(spec.to_module)
            indegree[spec.to_module] += 1
        frontier = [m for m, d in indegree.items() if d == 0]
        visited = 0
        while frontier:
            module = frontier.pop()
            visited += 1
            for nxt in out_edges[module]:
                indegree[nxt] -= 1
                if indegree[nxt] == 0:
                    frontier.append(nxt)
        if visited != len(self.modules):
            raise WorkloadError(f"{self.name}: module/message graph has a cycle")

    def module(self, name: str) -> AppModule:
        return next(m for m in self.modules if m.name == name)

    def spec(self, name: str) -> MessageSpec:
        return next(s for s in self.messages if s.name == name)

    def outbound(self, module_name: str) -> tuple[MessageSpec, ...]:
        return tuple(s for s in self.messages if s.from_module == module_name)

    def source_modules(self) -> tuple[AppModule, ...]:
        return tuple(m for m in self.modules if m.kind == ModuleKind.SOURCE)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "modules": [{"name": m.name, "kind": m.kind.value, "ram": m.ram} for m in self.modules],
            "messages": [
                {
                    "name": s.name,
                    "from": s.from_module,
                    "to": s.to_module,
                    "instructions": s.instructions,
                    "bytes": s.bytes,
                    "trigger_fraction": s.trigger_fraction,
                }
                for s in self.messages
            ],
            "loops": [list(loop) for loop in self.loops],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Application":
        return cls(
            name=data["name"],
            modules=tuple(
                AppModule(m["name"], ModuleKind(m["kind"]), m.get("ram", 10))
                for m in data["modules"]
            ),
            messages=tuple(
                MessageSpec(
                    s["name"],
                    s["from"],
                    s["to"],
                    s["instructions"],
                    s["bytes"],
                    s.get("trigger_fraction", 1.0),
                )
                for s in data["messages"]
            ),
            loops=tuple(tuple(loop) for loop in data.get("loops", ())),
        )


class Placement:
    """Stateless replica sets: (application, module) -> hosting node ids."""

    def __init__(self, replicas: dict[tuple[str, str], set[int]]):
        self.replicas = {key: frozenset(nodes) for key, nodes in replicas.items()}

    def of(self, app: str, module: str) -> tuple[int, ...]:
        return tuple(sorted(self.replicas[(app, module)]))

    def validate(self, topology: Topology, applications: list[Application]) -> None:
        apps = {a.name: a for a in applications}
        for (app_name, module_name), nodes in self.replicas.items():
            if app_name not in apps:
                raise WorkloadError(f"placement references unknown application {app_name}")
            app = apps[app_name]
            try:
                module = app.module(module_name)
            except StopIteration:
                raise WorkloadError(
                    f"placement references unknown module {app_name}/{module_name}"
                ) from None
            if not nodes:
                raise WorkloadError(f"empty replica set for {app_name}/{module_name}")
            for node_id in nodes:
                if node_id not in topology.nodes:
                    raise WorkloadError(
                        f"placement of {app_name}/{module_name} on unknown node {node_id}"
                    )
                kind = topology.nodes[node_id].kind
                if module.kind == ModuleKind.COMPUTE and kind == NodeKind.IOT:
                    raise WorkloadError(
                        f"compute module {app_name}/{module_name} placed on IoT node {node_id}"
                    )
                if module.kind != ModuleKind.COMPUTE and kind != NodeKind.IOT:
                    raise WorkloadError(
                        f"{module.kind.value} module {app_name}/{module_name} "
                        f"placed on non-IoT node {node_id}"
                    )
        for app in applications:
            for module in app.modules:
                if (app.name, module.name) not in self.replicas:
                    raise WorkloadError(f"module {app.name}/{module.name} is not placed")

    def to_dict(self) -> dict:
        return {
            "replicas": [
                {"app": app, "module": module, "nodes": sorted(nodes)}
                for (app, module), nodes in sorted(self.replicas.items())
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Placement":
        return cls(
            {(r["app"], r["module"]): set(r["nodes"]) for r in data["replicas"]}
        )


@dataclass(frozen=True)
class ArrivalProcess:
    """Exponential inter-arrival with integer rounding and a floor of 1 step
    so no two workloads of one stream are generated simultaneously."""

    scale: float = DEFAULT_ARRIVAL_SCALE
    minimum: int = 1

    def __post_init__(self) -> None:
        if self.scale < 1:
            raise WorkloadError("arrival scale must be >= 1")


def sample_inter_arrival(process: ArrivalProcess, rng: random.Random) -> int:
    x = rng.expovariate(1.0 / process.scale)
    return max(process.minimum, math.floor(x + 0.5))


# ----------------------------------------------------------------- suites


def _tier_apps(
    tiers: tuple[tuple[float, float], ...],
    build_messages,
    loops,
) -> list[Application]:
    modules = (
        AppModule("Sensor", ModuleKind.SOURCE),
        AppModule("Fog", ModuleKind.COMPUTE),
        AppModule("Cloud", ModuleKind.COMPUTE),
        AppModule("Actuator", ModuleKind.SINK),
    )
    apps = []
    for index, (instructions, size) in enumerate(tiers, start=1):
        apps.append(
            Application(
                name=f"App{index}",
                modules=modules,
                messages=build_messages(instructions, size),
                loops=loops,
            )
        )
    return apps


def _full_placement(topology: Topology, applications: list[Application]) -> Placement:
    iot = [n.id for n in topology.nodes_of_kind(NodeKind.IOT)]
    fog = [n.id for n in topology.nodes_of_kind(NodeKind.FOG)]
    cloud = [n.id for n in topology.nodes_of_kind(NodeKind.CLOUD)]
    replicas: dict[tuple[str, str], set[int]] = {}
    for app in applications:
        replicas[(app.name, "Sensor")] = set(iot)
        replicas[(app.name, "Actuator")] = set(iot)
        replicas[(app.name, "Fog")] = set(fog)
        replicas[(app.name, "Cloud")] = set(cloud)
    placement = Placement(replicas)
    placement.validate(topology, applications)
    return placement


def build_single_loop_suite(
    topology: Topology,
    tiers: tuple[tuple[float, float], ...] = DEFAULT_APP_TIERS,
) -> tuple[list[Application], Placement]:
    """Three applications with one unconditional Sensor->Fog->Cloud->Actuator
    loop each; every IoT device hosts sources/sinks, every Fog node a Fog
    replica, and the Cloud the Cloud modules."""

    def messages(instructions: float, size: float) -> tuple[MessageSpec, ...]:
        return (
            MessageSpec("Sensor", "Sensor", "Fog", instructions, size),
            MessageSpec("Fog", "Fog", "Cloud", instructions, size),
            MessageSpec("Cloud", "Cloud", "Actuator", instructions, size),
        )

    apps = _tier_apps(tiers, messages, loops=(("Sensor", "Fog", "Cloud"),))
    return apps, _full_placement(topology, apps)


def build_two_loop_suite(
    topology: Topology,
    tiers: tuple[tuple[float, float], ...] = DEFAULT_APP_TIERS,
    fog_down_fraction: float = FOG_DOWN_FRACTION,
    fog_up_fraction: float = FOG_UP_FRACTION,
    cloud_fraction: float = CLOUD_FRACTION,
) -> tuple[list[Application], Placement]:
    """Three applications with an immediate Fog feedback loop (every Sensor
    workload) and a thinned Cloud aggregation loop (10% Fog Up, of which 50%
    trigger Cloud feedback)."""

    def messages(instructions: float, size: float) -> tuple[MessageSpec, ...]:
        return (
            MessageSpec("Sensor", "Sensor", "Fog", instructions, size),
            MessageSpec("FogDown", "Fog", "Actuator", instructions, size, fog_down_fraction),
            MessageSpec("FogUp", "Fog", "Cloud", instructions, size, fog_up_fraction),
            MessageSpec("Cloud", "Cloud", "Actuator", instructions, size, cloud_fraction),
        )

    apps = _tier_apps(
        tiers, messages, loops=(("Sensor", "FogDown"), ("Sensor", "FogUp", "Cloud"))
    )
    return apps, _full_placement(topology, apps)
