"""Network model: nodes with edge/core roles, directed links, topology files
and a Waxman-style random generator."""

from __future__ import annotations

import heapq
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

INGRESS = "ingress"
CORE = "core"
EGRESS = "egress"
ROLES = (INGRESS, CORE, EGRESS)


class TopologyError(ValueError):
    """Malformed or invalid topology document."""


@dataclass
class Node:
    id: str
    role: str
    interfaces: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class Link:
    """A directed link. ``iface`` is the outgoing interface at ``src``;
    ``peer_iface`` is the interface of the same cable at ``dst``."""

    src: str
    dst: str
    capacity: int
    delay: float
    iface: str
    peer_iface: str


class Network:
    """Immutable-after-construction directed network.

    Every declared cable expands into two directed links. Interface ids are
    ``<node>.if<k>`` with ``k`` counted per node in declaration order, so an
    interface id also names the directed link leaving through it.
    """

    def __init__(self, nodes: Iterable[tuple[str, str]], cables: Iterable[tuple[str, str, int, float]]):
        self.nodes: dict[str, Node] = {}
        for node_id, role in nodes:
            if node_id in self.nodes:
                raise TopologyError(f"duplicate node {node_id!r}")
            if role not in ROLES:
                raise TopologyError(f"node {node_id!r}: unknown role {role!r}")
            self.nodes[node_id] = Node(node_id, role)

        self.cables: list[tuple[str, str, int, float]] = []
        self.links: dict[str, Link] = {}
        self.out_links: dict[str, list[Link]] = {n: [] for n in self.nodes}
        pairs: set[frozenset] = set()
        for src, dst, capacity, delay in cables:
            for end in (src, dst):
                if end not in self.nodes:
                    raise TopologyError(f"link references unknown node {end!r}")
            if src == dst:
                raise TopologyError(f"self-loop on {src!r}")
            if capacity <= 0:
                raise TopologyError(f"link {src}-{dst}: capacity must be > 0")
            if delay < 0:
                raise TopologyError(f"link {src}-{dst}: delay must be >= 0")
            pair = frozenset((src, dst))
            if pair in pairs:
                raise TopologyError(f"duplicate link {src}-{dst}")
            pairs.add(pair)
            capacity = int(capacity)
            delay = float(delay)
            self.cables.append((src, dst, capacity, delay))
            a_if = self._new_iface(src)
            b_if = self._new_iface(dst)
            fwd = Link(src, dst, capacity, delay, a_if, b_if)
            rev = Link(dst, src, capacity, delay, b_if, a_if)
            self.links[a_if] = fwd
            self.links[b_if] = rev
            self.out_links[src].append(fwd)
            self.out_links[dst].append(rev)
        self._validate()

    def _new_iface(self, node_id: str) -> str:
        node = self.nodes[node_id]
        iface = f"{node_id}.if{len(node.interfaces) + 1}"
        node.interfaces.append(iface)
        return iface

    def _validate(self) -> None:
        if not self.ingresses():
            raise TopologyError("network has no ingress node")
        if not self.egresses():
            raise TopologyError("network has no egress node")
        start = next(iter(self.nodes))
        seen = {start}
        queue = deque([start])
        while queue:
            for link in self.out_links[queue.popleft()]:
                if link.dst not in seen:
                    seen.add(link.dst)
                    queue.append(link.dst)
        if len(seen) != len(self.nodes):
            missing = sorted(set(self.nodes) - seen)
            raise TopologyError(f"network is disconnected; unreachable: {missing}")
        for ingress in self.ingresses():
            reach = edge_reachable(self, ingress)
            lost = [e for e in self.egresses() if e not in reach]
            if lost:
                raise TopologyError(f"egresses {lost} not reachable from {ingress} through core nodes")

    def role(self, node_id: str) -> str:
        return self.nodes[node_id].role

    def ingresses(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.role == INGRESS]

    def egresses(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.role == EGRESS]

    def owner(self, iface: str) -> str:
        return self.links[iface].src

    def link_between(self, src: str, dst: str) -> Link | None:
        for link in self.out_links[src]:
            if link.dst == dst:
                return link
        return None

    def arrival_iface(self, iface: str) -> str:
        """Interface at the receiving end of the link leaving through ``iface``."""
        return self.links[iface].peer_iface

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "role": n.role} for n in self.nodes.values()],
            "links": [
                {"from": s, "to": d, "capacity_bps": c, "delay_s": dl}
                for s, d, c, dl in self.cables
            ],
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return f"Network({len(self.nodes)} nodes, {len(self.cables)} links)"


def edge_reachable(net: Network, ingress: str) -> set[str]:
    """Nodes reachable from ``ingress`` when only core nodes may forward."""
    seen = {ingress}
    queue = deque([ingress])
    while queue:
        node = queue.popleft()
        if node != ingress and net.role(node) != CORE:
            continue
        for link in net.out_links[node]:
            if link.dst not in seen:
                seen.add(link.dst)
                queue.append(link.dst)
    return seen


def load_topology(document: str | dict) -> Network:
    """Parse a JSON topology document (text or already-decoded dict)."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise TopologyError(f"invalid JSON: {exc}") from exc
    try:
        nodes = [(str(n["id"]), str(n["role"])) for n in document["nodes"]]
        cables = [
            (str(l["from"]), str(l["to"]), l["capacity_bps"], l["delay_s"])
            for l in document["links"]
        ]
    except (KeyError, TypeError) as exc:
        raise TopologyError(f"malformed topology document: {exc!r}") from exc
    for _, _, cap, delay in cables:
        if not isinstance(cap, (int, float)) or not isinstance(delay, (int, float)):
            raise TopologyError("capacity_bps and delay_s must be numbers")
    return Network(nodes, cables)


def load_topology_file(path: str | Path) -> Network:
    return load_topology(Path(path).read_text())


def dump_topology(net: Network) -> str:
    return json.dumps(net.to_dict(), indent=2) + "\n"


@dataclass
class GeneratorParams:
    alpha: float = 0.4
    beta: float = 0.4
    capacity_range: tuple[int, int] = (10_000_000, 100_000_000)
    delay_range: tuple[float, float] = (0.001, 0.010)
    ingress: int | None = None  # node index; default = lowest-degree node
    egress_count: int | None = None  # default max(2, n // 3)
    max_attempts: int = 100

    def validate(self) -> None:
        lo, hi = self.capacity_range
        if lo <= 0 or hi < lo:
            raise ValueError(f"invalid capacity range {self.capacity_range}")
        dlo, dhi = self.delay_range
        if dlo < 0 or dhi < dlo:
            raise ValueError(f"invalid delay range {self.delay_range}")
        if not (0 < self.alpha and 0 < self.beta <= 1):
            raise ValueError("alpha must be > 0 and beta in (0, 1]")


def _waxman_edges(n: int, params: GeneratorParams, rng: random.Random) -> list[tuple[int, int]]:
    pos = [(rng.random(), rng.random()) for _ in range(n)]
    scale = math.sqrt(2.0)

    def weight(u: int, v: int) -> float:
        return params.beta * math.exp(-math.dist(pos[u], pos[v]) / (params.alpha * scale))

    edges: set[tuple[int, int]] = set()
    # incremental attachment keeps the graph connected
    for v in range(1, n):
        ws = [weight(u, v) for u in range(v)]
        u = rng.choices(range(v), weights=ws)[0]
        edges.add((u, v))
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in edges and rng.random() < weight(u, v):
                edges.add((u, v))
    return sorted(edges)


def _assign_roles(n: int, edges: list[tuple[int, int]], params: GeneratorParams) -> list[str] | None:
    degree = [0] * n
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
        adj[u].append(v)
        adj[v].append(u)
    ingress = params.ingress
    if ingress is None:
        ingress = min(range(n), key=lambda i: (degree[i], i))
    if n == 2:
        return [INGRESS if i == ingress else EGRESS for i in range(n)]
    want = params.egress_count if params.egress_count is not None else max(2, n // 3)
    roles = [CORE] * n
    roles[ingress] = INGRESS

    def ok(candidate_roles: list[str]) -> bool:
        seen = {ingress}
        queue = deque([ingress])
        while queue:
            x = queue.popleft()
            if x != ingress and candidate_roles[x] != CORE:
                continue
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return all(i in seen for i in range(n) if candidate_roles[i] == EGRESS)

    chosen = 0
    for cand in sorted((i for i in range(n) if i != ingress), key=lambda i: (degree[i], i)):
        if chosen == want:
            break
        trial = list(roles)
        trial[cand] = EGRESS
        if ok(trial):
            roles = trial
            chosen += 1
    if chosen < 2:
        return None
    return roles


def random_topology(n: int, seed: int, params: GeneratorParams | None = None) -> Network:
    """Deterministic Waxman-style topology with edge roles on low-degree nodes."""
    if n < 2:
        raise ValueError("need at least 2 nodes")
    params = params or GeneratorParams()
    params.validate()
    if params.ingress is not None and not 0 <= params.ingress < n:
        raise ValueError("ingress index out of range")
    rng = random.Random(seed)
    for _ in range(params.max_attempts):
        edges = _waxman_edges(n, params, rng)
        roles = _assign_roles(n, edges, params)
        if roles is None:
            continue
        names = [f"n{i}" for i in range(n)]
        cables = []
        for u, v in edges:
            cap = rng.randint(*params.capacity_range)
            delay = round(rng.uniform(*params.delay_range), 6)
            cables.append((names[u], names[v], cap, delay))
        return Network(zip(names, roles), cables)
    raise ValueError(f"could not generate a valid topology in {params.max_attempts} attempts")


def shortest_paths_oracle(net: Network, ingress: str, exclude: Iterable[str] = ()) -> dict[str, list[str]]:
    """Minimum-hop edge-to-edge path (as outgoing interfaces) to every egress.

    Only core nodes transit and interfaces in ``exclude`` are skipped. Ties
    go to the lexicographically smallest interface sequence. Every path is
    its predecessor's path plus one hop, so the paths form a tree.
    """
    exclude = set(exclude)
    if net.role(ingress) != INGRESS:
        raise ValueError(f"{ingress!r} is not an ingress")
    best: dict[str, tuple[str, ...]] = {ingress: ()}
    frontier = [ingress]
    while frontier:
        layer: dict[str, tuple[str, ...]] = {}
        for node in frontier:
            if node != ingress and net.role(node) != CORE:
                continue
            for link in net.out_links[node]:
                if link.dst in best or link.iface in exclude:
                    continue
                path = best[node] + (link.iface,)
                if link.dst not in layer or path < layer[link.dst]:
                    layer[link.dst] = path
        best.update(layer)
        frontier = sorted(layer)
    return {e: list(best[e]) for e in net.egresses() if e in best}


def path_nodes(net: Network, path: list[str]) -> list[str]:
    """Node sequence visited by an interface path."""
    if not path:
        return []
    nodes = [net.links[path[0]].src]
    for iface in path:
        nodes.append(net.links[iface].dst)
    return nodes


def path_delay(net: Network, path: Iterable[str]) -> float:
    return sum(net.links[i].delay for i in path)


def delay_diameter(net: Network) -> float:
    """Largest min-delay distance between any two nodes (Dijkstra per node)."""
    worst = 0.0
    for src in net.nodes:
        dist = {src: 0.0}
        heap = [(0.0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist.get(u, math.inf):
                continue
            for link in net.out_links[u]:
                nd = d + link.delay
                if nd < dist.get(link.dst, math.inf):
                    dist[link.dst] = nd
                    heapq.heappush(heap, (nd, link.dst))
        worst = max(worst, max(dist.values()))
    return worst
