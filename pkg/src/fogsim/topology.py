"""Fog network graph model: nodes, links, deterministic routing, centrality,
and the two evaluation scenario builders (fixed generic and randomized AS-like).
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from heapq import heappop, heappush

from .seeding import derive_seed

DEFAULT_RAM = 4000

CLOUD_IPT = 1_000_000
IOT_IPT = 10
FOG_IPT_LOW = 1_000
FOG_IPT_HIGH = 100_000

# Uniform draw intervals for randomized link parameters, by link class.
AS_LINK_PARAMS = {
    "iot-fog": ((100.0, 1000.0), (1.0, 2.0)),
    "fog-fog": ((1000.0, 10_000.0), (2.0, 4.0)),
    "fog-cloud": ((1000.0, 10_000.0), (10.0, 20.0)),
}


class TopologyError(ValueError):
    pass


class NodeKind(str, Enum):
    CLOUD = "cloud"
    FOG = "fog"
    IOT = "iot"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    ipt: float
    ram: int = DEFAULT_RAM

    def __post_init__(self) -> None:
        if self.ipt <= 0:
            raise TopologyError(f"node {self.id}: ipt must be positive")


@dataclass(frozen=True)
class Link:
    """Bidirectional link; stored with endpoints ordered a < b."""

    a: int
    b: int
    bw: float
    pr: float

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise TopologyError(f"self-loop on node {self.a}")
        if self.a > self.b:
            lo, hi = self.b, self.a
            object.__setattr__(self, "a", lo)
            object.__setattr__(self, "b", hi)
        if self.bw <= 0:
            raise TopologyError(f"link {self.a}-{self.b}: bw must be positive")
        if self.pr < 0:
            raise TopologyError(f"link {self.a}-{self.b}: pr must be non-negative")

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b)

    def other(self, node: int) -> int:
        return self.b if node == self.a else self.a


@dataclass(frozen=True)
class Path:
    """Route from nodes[0] to nodes[-1]; links[i] joins nodes[i] and nodes[i+1]."""

    nodes: tuple[int, ...]
    links: tuple[Link, ...]

    @property
    def hops(self) -> int:
        return len(self.links)

    @property
    def propagation(self) -> float:
        return sum(link.pr for link in self.links)


def hop_count(path: Path) -> int:
    return path.hops


def path_propagation_delay(path: Path) -> float:
    return path.propagation


class Topology:
    """Immutable connected graph with precomputed deterministic shortest paths.

    Route choice minimizes (hop count, total propagation delay, node-id
    sequence); the lexicographic tail makes every route unique, so downstream
    selection and centrality are reproducible.
    """

    def __init__(self, nodes: list[Node], links: list[Link]):
        self.nodes: dict[int, Node] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise TopologyError(f"duplicate node id {node.id}")
            self.nodes[node.id] = node
        self.links: dict[tuple[int, int], Link] = {}
        self.adjacency: dict[int, dict[int, Link]] = {nid: {} for nid in self.nodes}
        for link in links:
            if link.a not in self.nodes or link.b not in self.nodes:
                raise TopologyError(f"link {link.key} references unknown node")
            if link.key in self.links:
                raise TopologyError(f"duplicate link {link.key}")
            self.links[link.key] = link
            self.adjacency[link.a][link.b] = link
            self.adjacency[link.b][link.a] = link
        self._check_connected()
        self._routes: dict[int, dict[int, Path]] = {}

    def _check_connected(self) -> None:
        if not self.nodes:
            raise TopologyError("empty topology")
        start = next(iter(self.nodes))
        seen = {start}
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for neighbor in self.adjacency[node]:
                if neighbor not in seen:
                    seen.add(neighbor)
                    frontier.append(neighbor)
        if len(seen) != len(self.nodes):
            missing = sorted(set(self.nodes) - seen)
            raise TopologyError(f"topology not connected; unreachable nodes {missing}")

    def nodes_of_kind(self, kind: NodeKind) -> list[Node]:
        return sorted((n for n in self.nodes.values() if n.kind == kind), key=lambda n: n.id)

    def _paths_from(self, src: int) -> dict[int, Path]:
        """Dijkstra on the compound key (hops, propagation, node sequence)."""
        best: dict[int, tuple[int, ...]] = {}
        heap: list[tuple[int, float, tuple[int, ...]]] = [(0, 0.0, (src,))]
        while heap:
            hops, pr, seq = heappop(heap)
            node = seq[-1]
            if node in best:
                continue
            best[node] = seq
            for neighbor in sorted(self.adjacency[node]):
                if neighbor not in best:
                    link = self.adjacency[node][neighbor]
                    heappush(heap, (hops + 1, pr + link.pr, seq + (neighbor,)))
        routes = {}
        for dst, seq in best.items():
            links = tuple(self.adjacency[seq[i]][seq[i + 1]] for i in range(len(seq) - 1))
            routes[dst] = Path(nodes=seq, links=links)
        return routes

    def route(self, src: int, dst: int) -> Path:
        if src not in self.nodes or dst not in self.nodes:
            raise TopologyError(f"unknown node in route {src}->{dst}")
        if src not in self._routes:
            self._routes[src] = self._paths_from(src)
        return self._routes[src][dst]

    def betweenness_centrality(self) -> dict[int, int]:
        """Per node: number of unordered pairs whose chosen route transits it."""
        scores = {nid: 0 for nid in self.nodes}
        ids = sorted(self.nodes)
        for i, s in enumerate(ids):
            for t in ids[i + 1 :]:
                for via in self.route(s, t).nodes[1:-1]:
                    scores[via] += 1
        return scores

    # ------------------------------------------------------------------ JSON

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n.id, "kind": n.kind.value, "ipt": n.ipt, "ram": n.ram}
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "links": [
                {"a": l.a, "b": l.b, "bw": l.bw, "pr": l.pr}
                for l in sorted(self.links.values(), key=lambda l: l.key)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        nodes = [
            Node(id=n["id"], kind=NodeKind(n["kind"]), ipt=n["ipt"], ram=n["ram"])
            for n in data["nodes"]
        ]
        links = [Link(a=l["a"], b=l["b"], bw=l["bw"], pr=l["pr"]) for l in data["links"]]
        return cls(nodes, links)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        return cls.from_dict(json.loads(text))


def shortest_path(topology: Topology, src: int, dst: int) -> Path:
    return topology.route(src, dst)


def betweenness_centrality(topology: Topology) -> dict[int, int]:
    return topology.betweenness_centrality()


# --------------------------------------------------------------- scenarios

CLOUD_ID = 0
FOG1_ID = 1
FOG2_ID = 2
FOG3_ID = 3
FOG1_IOT_IDS = (4, 5)
FOG2_IOT_IDS = tuple(range(6, 26))


def build_generic_topology() -> Topology:
    """Fixed 26-node unbalanced scenario: one Cloud, three Fog nodes, 22 IoT
    devices (2 behind Fog1, 20 behind the under-provisioned Fog2; none on the
    fastest Fog3)."""
    nodes = [
        Node(CLOUD_ID, NodeKind.CLOUD, CLOUD_IPT),
        Node(FOG1_ID, NodeKind.FOG, 10_000),
        Node(FOG2_ID, NodeKind.FOG, 1_000),
        Node(FOG3_ID, NodeKind.FOG, 100_000),
    ]
    links = [
        Link(FOG1_ID, FOG3_ID, bw=1000, pr=2),
        Link(FOG2_ID, FOG3_ID, bw=1000, pr=2),
        Link(FOG1_ID, CLOUD_ID, bw=100_000, pr=10),
        Link(FOG2_ID, CLOUD_ID, bw=100_000, pr=10),
        Link(FOG3_ID, CLOUD_ID, bw=1000, pr=20),
    ]
    for iot in FOG1_IOT_IDS:
        nodes.append(Node(iot, NodeKind.IOT, IOT_IPT))
        links.append(Link(iot, FOG1_ID, bw=1000, pr=1))
    for iot in FOG2_IOT_IDS:
        nodes.append(Node(iot, NodeKind.IOT, IOT_IPT))
        links.append(Link(iot, FOG2_ID, bw=1000, pr=1))
    return Topology(nodes, links)


AS_LEAF_PROBABILITY = 0.7  # fraction of single-homed (stub) nodes
AS_HUB_EXPONENT = 1.0  # attachment weight = degree ** exponent


def _preferential_attachment_edges(
    rng: random.Random,
    count: int,
    leaf_probability: float = AS_LEAF_PROBABILITY,
    hub_exponent: float = AS_HUB_EXPONENT,
) -> list[tuple[int, int]]:
    """Grow a connected graph where each new node links to existing nodes
    chosen with weight degree**hub_exponent: single-homed with probability
    leaf_probability (stub customers), dual-homed otherwise. This mirrors the
    hub/leaf structure of AS graphs, where most nodes are pure leaves."""
    edges = [(0, 1)]
    degree = {0: 1, 1: 1}
    for new in range(2, count):
        population = sorted(degree)
        weights = [degree[n] ** hub_exponent for n in population]
        attach = 1 if rng.random() < leaf_probability else 2
        first = rng.choices(population, weights=weights)[0]
        chosen = [first]
        if attach == 2:
            second = first
            while second == first:
                second = rng.choices(population, weights=weights)[0]
            chosen.append(second)
        for node in chosen:
            edges.append((min(new, node), max(new, node)))
            degree[node] += 1
        degree[new] = attach
    return sorted(edges)


def classify_by_centrality(topology: Topology) -> tuple[list[int], list[int]]:
    """Split nodes into (zero-centrality ids, positive-centrality ids ranked
    by descending centrality, ties by ascending id)."""
    scores = topology.betweenness_centrality()
    zero = sorted(nid for nid, s in scores.items() if s == 0)
    ranked = sorted((nid for nid, s in scores.items() if s > 0), key=lambda nid: (-scores[nid], nid))
    return zero, ranked


def evenly_spaced_fog_ipts(count: int) -> list[int]:
    """`count` evenly spaced integers over [FOG_IPT_LOW, FOG_IPT_HIGH]."""
    if count < 2:
        raise TopologyError("need at least 2 Fog nodes for the ipt ladder")
    step = (FOG_IPT_HIGH - FOG_IPT_LOW) / (count - 1)
    return [round(FOG_IPT_LOW + i * step) for i in range(count)]


def generate_as_topology(
    seed: int,
    node_count: int = 32,
    max_retries: int = 16,
    leaf_probability: float = AS_LEAF_PROBABILITY,
    hub_exponent: float = AS_HUB_EXPONENT,
) -> Topology:
    """Randomized AS-like scenario: grow a hub/leaf graph, classify
    zero-centrality nodes as IoT devices, ladder Fog compute inversely to
    centrality, then attach a Cloud to the two most central Fog nodes.
    """
    if node_count < 10:
        raise TopologyError("node_count must be >= 10")
    for attempt in range(max_retries):
        rng = random.Random(derive_seed(seed, "as-topology", attempt))
        edges = _preferential_attachment_edges(rng, node_count, leaf_probability, hub_exponent)
        skeleton = Topology(
            [Node(i, NodeKind.FOG, ipt=1) for i in range(node_count)],
            [Link(a, b, bw=1.0, pr=0.0) for a, b in edges],
        )
        iot_ids, fog_ranked = classify_by_centrality(skeleton)
        if len(fog_ranked) < 2 or len(iot_ids) < 1:
            continue

        ipts = evenly_spaced_fog_ipts(len(fog_ranked))
        fog_ipt = {nid: ipts[rank] for rank, nid in enumerate(fog_ranked)}
        cloud_id = node_count

        nodes = [Node(cloud_id, NodeKind.CLOUD, CLOUD_IPT)]
        for nid in range(node_count):
            if nid in fog_ipt:
                nodes.append(Node(nid, NodeKind.FOG, fog_ipt[nid]))
            else:
                nodes.append(Node(nid, NodeKind.IOT, IOT_IPT))

        iot_set = set(iot_ids)
        links = []
        for a, b in edges:
            cls = "iot-fog" if (a in iot_set or b in iot_set) else "fog-fog"
            (bw_lo, bw_hi), (pr_lo, pr_hi) = AS_LINK_PARAMS[cls]
            links.append(Link(a, b, bw=rng.uniform(bw_lo, bw_hi), pr=rng.uniform(pr_lo, pr_hi)))
        (bw_lo, bw_hi), (pr_lo, pr_hi) = AS_LINK_PARAMS["fog-cloud"]
        for fog in fog_ranked[:2]:
            links.append(Link(fog, cloud_id, bw=rng.uniform(bw_lo, bw_hi), pr=rng.uniform(pr_lo, pr_hi)))
        return Topology(nodes, links)
    raise TopologyError(
        f"AS generation produced no usable split after {max_retries} attempts (seed {seed})"
    )
