"""Partitioned logistic worlds: per-agent private areas joined by public hubs.

A world is a set of agents, each owning a private connected subgraph (its
"area") of bases and weighted routes, plus shared public hub nodes where
areas meet and items are handed over.  Areas are private data: protocol code
must access them through :meth:`LogisticWorld.area` inside an
:func:`acting_as` block, which the privacy audit uses to prove that no agent
ever reads another agent's true map.
"""

from __future__ import annotations

import contextlib
import contextvars
import heapq
import itertools
import json
import math
import string
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .seeding import spawn

PUBLIC_AREA = "pub"

# Edge lengths are sampled uniformly from this range; magnitudes match the
# double-digit route lengths used throughout the docs and fixtures.
MIN_EDGE_LENGTH = 20.0
MAX_EDGE_LENGTH = 100.0

# A hub connects to each adjacent area with 1..3 routes, but never carries
# more than 4 routes in total.
MAX_HUB_DEGREE = 4
MAX_HUB_AREA_EDGES = 3


class WorldValidationError(ValueError):
    """A map or world violates a structural invariant."""


class PrivateAccessError(RuntimeError):
    """An agent tried to read another agent's private area."""


@dataclass(frozen=True, order=True)
class NodeId:
    """A node, identified by its owning area ('pub' for hubs) and an index."""

    area: str
    index: int

    @property
    def is_hub(self) -> bool:
        return self.area == PUBLIC_AREA

    def __str__(self) -> str:
        return f"{self.area}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        area, _, idx = text.partition(":")
        if not area or not idx:
            raise WorldValidationError(f"malformed node id {text!r}")
        try:
            return cls(area, int(idx))
        except ValueError as exc:
            raise WorldValidationError(f"malformed node id {text!r}") from exc


def hub(index: int) -> NodeId:
    return NodeId(PUBLIC_AREA, index)


@dataclass(frozen=True)
class Edge:
    """Undirected weighted route; endpoints are stored in sorted order."""

    u: NodeId
    v: NodeId
    length: float

    def __post_init__(self) -> None:
        if self.u == self.v:
            raise WorldValidationError(f"self-loop at {self.u}")
        if not self.length > 0:
            raise WorldValidationError(f"non-positive length on {self.u}~{self.v}")
        if self.v < self.u:
            lo, hi = self.v, self.u
            object.__setattr__(self, "u", lo)
            object.__setattr__(self, "v", hi)

    @property
    def key(self) -> tuple[NodeId, NodeId]:
        return (self.u, self.v)

    def other(self, node: NodeId) -> NodeId:
        if node == self.u:
            return self.v
        if node == self.v:
            return self.u
        raise KeyError(node)


Adjacency = dict[NodeId, list[tuple[NodeId, float]]]


def build_adjacency(nodes: Iterable[NodeId], edges: Iterable[Edge]) -> Adjacency:
    adj: Adjacency = {node: [] for node in sorted(nodes)}
    for edge in edges:
        adj[edge.u].append((edge.v, edge.length))
        adj[edge.v].append((edge.u, edge.length))
    for neighbours in adj.values():
        neighbours.sort()
    return adj


@dataclass
class LocalMap:
    """One agent's private subgraph plus the public hubs adjacent to it."""

    owner: str
    nodes: tuple[NodeId, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        self.nodes = tuple(sorted(set(self.nodes)))
        self.edges = tuple(sorted(self.edges, key=lambda e: e.key))

    @property
    def hubs(self) -> tuple[NodeId, ...]:
        return tuple(n for n in self.nodes if n.is_hub)

    @property
    def bases(self) -> tuple[NodeId, ...]:
        return tuple(n for n in self.nodes if not n.is_hub)

    def adjacency(self) -> Adjacency:
        return build_adjacency(self.nodes, self.edges)

    def average_length(self) -> float:
        if not self.edges:
            raise WorldValidationError(f"area of {self.owner!r} has no edges")
        return sum(e.length for e in self.edges) / len(self.edges)

    def has_edge(self, u: NodeId, v: NodeId) -> bool:
        key = (u, v) if u < v else (v, u)
        return any(e.key == key for e in self.edges)

    def validate(self) -> None:
        if not self.hubs:
            raise WorldValidationError(f"area of {self.owner!r} has no hub")
        for node in self.bases:
            if node.area != self.owner:
                raise WorldValidationError(
                    f"node {node} does not belong to area {self.owner!r}"
                )
        node_set = set(self.nodes)
        seen: set[tuple[NodeId, NodeId]] = set()
        for edge in self.edges:
            if edge.u not in node_set or edge.v not in node_set:
                raise WorldValidationError(f"edge {edge.u}~{edge.v} leaves the area")
            if edge.u.is_hub and edge.v.is_hub:
                raise WorldValidationError("hubs are joined through areas, not directly")
            if edge.key in seen:
                raise WorldValidationError(f"duplicate edge {edge.u}~{edge.v}")
            seen.add(edge.key)
        if not is_connected(self.nodes, self.edges):
            raise WorldValidationError(f"area of {self.owner!r} is not connected")
        adj = self.adjacency()
        isolated = [n for n, nbrs in adj.items() if not nbrs]
        if isolated:
            raise WorldValidationError(f"isolated nodes in area {self.owner!r}: {isolated}")


def is_connected(nodes: Iterable[NodeId], edges: Iterable[Edge]) -> bool:
    nodes = sorted(set(nodes))
    if len(nodes) <= 1:
        return True
    adj = build_adjacency(nodes, edges)
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        current = stack.pop()
        for nbr, _ in adj[current]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return len(seen) == len(nodes)


# --- privacy boundary -------------------------------------------------------

_ACTOR: contextvars.ContextVar[str | None] = contextvars.ContextVar(
    "privplan_actor", default=None
)
_STRICT: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "privplan_strict", default=False
)
_ACCESS_LOG: list[tuple[str | None, str]] | None = None


@contextlib.contextmanager
def acting_as(agent: str) -> Iterator[None]:
    """Mark the code inside the block as running on behalf of one agent."""
    token = _ACTOR.set(agent)
    try:
        yield
    finally:
        _ACTOR.reset(token)


def current_actor() -> str | None:
    return _ACTOR.get()


@contextlib.contextmanager
def audit_private_access() -> Iterator[list[tuple[str | None, str]]]:
    """Record every private-area read and forbid reads outside agent context.

    Yields the log of (actor, area owner) pairs; with the audit active, any
    area read without an actor context raises, so a clean run proves that all
    private reads were performed by the owning agent itself.
    """
    global _ACCESS_LOG
    log: list[tuple[str | None, str]] = []
    token = _STRICT.set(True)
    previous = _ACCESS_LOG
    _ACCESS_LOG = log
    try:
        yield log
    finally:
        _STRICT.reset(token)
        _ACCESS_LOG = previous


def _check_area_access(owner: str) -> None:
    actor = _ACTOR.get()
    if _ACCESS_LOG is not None:
        _ACCESS_LOG.append((actor, owner))
    if actor is None:
        if _STRICT.get():
            raise PrivateAccessError(
                f"area of {owner!r} read outside any agent context during audit"
            )
        return
    if actor != owner:
        raise PrivateAccessError(f"agent {actor!r} tried to read area of {owner!r}")


# --- the world --------------------------------------------------------------

class LogisticWorld:
    """Global partitioned map: agents' areas joined by capacity-bounded hubs."""

    def __init__(
        self,
        agents: Sequence[str],
        areas: Mapping[str, LocalMap],
        hub_capacity: Mapping[NodeId, int],
    ) -> None:
        self.agents: tuple[str, ...] = tuple(agents)
        self._areas: dict[str, LocalMap] = {agent: areas[agent] for agent in self.agents}
        self.hub_capacity: dict[NodeId, int] = dict(sorted(hub_capacity.items()))
        self.validate()

    def __repr__(self) -> str:
        return (
            f"LogisticWorld(agents={len(self.agents)}, hubs={len(self.hub_capacity)}, "
            f"bases={len(self.private_nodes())})"
        )

    # Public structure: hub identities, capacities and memberships are known
    # to every agent; area internals are not.
    @property
    def hubs(self) -> tuple[NodeId, ...]:
        return tuple(self.hub_capacity)

    def hub_members(self, hub_id: NodeId) -> tuple[str, ...]:
        return tuple(
            agent for agent in self.agents if hub_id in self._areas[agent].hubs
        )

    def agent_hubs(self, agent: str) -> tuple[NodeId, ...]:
        return self._areas[agent].hubs

    def capacity_sum(self) -> int:
        return sum(self.hub_capacity.values())

    def area(self, agent: str) -> LocalMap:
        """The agent's true private map; guarded by the acting-agent context."""
        if agent not in self._areas:
            raise KeyError(f"unknown agent {agent!r}")
        _check_area_access(agent)
        return self._areas[agent]

    def owner_of(self, node: NodeId) -> str:
        if node.is_hub:
            raise KeyError("hubs are public and have no owner")
        if node.area not in self._areas:
            raise KeyError(f"unknown agent {node.area!r}")
        return node.area

    # Environment-level helpers (simulation harness and tests only).
    def private_nodes(self) -> tuple[NodeId, ...]:
        return tuple(
            itertools.chain.from_iterable(
                self._areas[agent].bases for agent in self.agents
            )
        )

    def union_adjacency(self) -> Adjacency:
        nodes: set[NodeId] = set()
        edges: list[Edge] = []
        for agent in self.agents:
            area = self._areas[agent]
            nodes.update(area.nodes)
            edges.extend(area.edges)
        return build_adjacency(nodes, edges)

    def replace_area(self, agent: str, area: LocalMap) -> "LogisticWorld":
        areas = dict(self._areas)
        areas[agent] = area
        return LogisticWorld(self.agents, areas, self.hub_capacity)

    def validate(self) -> None:
        if not self.agents:
            raise WorldValidationError("world has no agents")
        if len(set(self.agents)) != len(self.agents):
            raise WorldValidationError("duplicate agent ids")
        if PUBLIC_AREA in self.agents:
            raise WorldValidationError(f"agent id {PUBLIC_AREA!r} is reserved")
        seen_bases: set[NodeId] = set()
        for agent, area in self._areas.items():
            if area.owner != agent:
                raise WorldValidationError(f"area owner {area.owner!r} != {agent!r}")
            area.validate()
            overlap = seen_bases.intersection(area.bases)
            if overlap:
                raise WorldValidationError(f"areas share private nodes: {overlap}")
            seen_bases.update(area.bases)
        for hub_id, capacity in self.hub_capacity.items():
            if not hub_id.is_hub:
                raise WorldValidationError(f"{hub_id} is not a hub")
            sharing = len(self.hub_members(hub_id))
            if sharing == 0:
                raise WorldValidationError(f"hub {hub_id} touches no area")
            if sharing > capacity:
                raise WorldValidationError(
                    f"hub {hub_id} shared by {sharing} agents, capacity {capacity}"
                )
        used_hubs = {h for agent in self.agents for h in self._areas[agent].hubs}
        if used_hubs != set(self.hub_capacity):
            raise WorldValidationError("hub list and area hubs disagree")
        nodes: set[NodeId] = set()
        edges: list[Edge] = []
        for area in self._areas.values():
            nodes.update(area.nodes)
            edges.extend(area.edges)
        if not is_connected(nodes, edges):
            raise WorldValidationError("world graph is not connected")


@dataclass(frozen=True)
class Task:
    """Deliver one item from a private base to a private base elsewhere."""

    item: int
    initial: NodeId
    goal: NodeId

    def __post_init__(self) -> None:
        if self.initial == self.goal:
            raise WorldValidationError("task initial and goal coincide")
        if self.initial.is_hub or self.goal.is_hub:
            raise WorldValidationError("task endpoints must be private bases")


@dataclass(frozen=True)
class DegreeDistribution:
    """Node counts per degree, P(1..d_max); degree-0 is never represented."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.counts:
            raise WorldValidationError("empty degree distribution")
        if any(c < 0 for c in self.counts):
            raise WorldValidationError("negative degree count")

    @property
    def d_max(self) -> int:
        return len(self.counts)

    @property
    def total_nodes(self) -> int:
        return sum(self.counts)

    def count(self, degree: int) -> int:
        if not 1 <= degree <= self.d_max:
            return 0
        return self.counts[degree - 1]


def degree_distribution(local_map: LocalMap) -> DegreeDistribution:
    """Count nodes per degree over the map, the graph's 1K statistics."""
    adj = local_map.adjacency()
    degrees = [len(nbrs) for nbrs in adj.values()]
    d_max = max(degrees)
    counts = [0] * d_max
    for d in degrees:
        counts[d - 1] += 1
    return DegreeDistribution(tuple(counts))


# --- shortest paths ---------------------------------------------------------

def shortest_path(
    graph: LocalMap | Adjacency,
    src: NodeId,
    dst: NodeId,
    prefer_fewer_hops: bool = False,
) -> tuple[list[NodeId] | None, float]:
    """Dijkstra with deterministic lexicographic tie-breaking.

    Returns (node sequence, total length); ([], 0.0) when src == dst and
    (None, inf) when dst is unreachable.  With ``prefer_fewer_hops`` ties on
    length are broken by hop count before node order.
    """
    adj = graph.adjacency() if isinstance(graph, LocalMap) else graph
    if src not in adj:
        raise KeyError(f"unknown node {src}")
    if dst not in adj:
        raise KeyError(f"unknown node {dst}")
    if src == dst:
        return [], 0.0
    start = (0.0, 1, (src,)) if prefer_fewer_hops else (0.0, (src,))
    heap: list[tuple] = [start]
    done: set[NodeId] = set()
    while heap:
        entry = heapq.heappop(heap)
        dist, path = entry[0], entry[-1]
        node = path[-1]
        if node == dst:
            return list(path), dist
        if node in done:
            continue
        done.add(node)
        for nbr, weight in adj[node]:
            if nbr in done:
                continue
            if prefer_fewer_hops:
                heapq.heappush(heap, (dist + weight, len(path) + 1, path + (nbr,)))
            else:
                heapq.heappush(heap, (dist + weight, path + (nbr,)))
    return None, math.inf


def neighbors(world: LogisticWorld, agent: str) -> set[str]:
    """Agents whose areas share at least one hub with the given agent."""
    if agent not in world.agents:
        raise KeyError(f"unknown agent {agent!r}")
    found: set[str] = set()
    for hub_id in world.agent_hubs(agent):
        found.update(world.hub_members(hub_id))
    found.discard(agent)
    return found


# --- generation -------------------------------------------------------------

def agent_name(index: int) -> str:
    """Spreadsheet-style agent names: a..z, aa, ab, ..."""
    letters = string.ascii_lowercase
    name = ""
    index += 1
    while index > 0:
        index, rem = divmod(index - 1, 26)
        name = letters[rem] + name
    return name


def generate_world(
    num_hubs: int,
    bases_per_area: int,
    seed: int,
    extra_edge_prob: float = 0.15,
    extra_hub_share_prob: float = 0.25,
) -> LogisticWorld:
    """Generate a random connected world with one area per hub.

    Areas sit on a ring with one hub between consecutive areas; some hubs
    additionally serve a third area, which creates shortcut routes.  Each
    area is a random connected graph (spanning tree plus extra edges), and
    each (hub, area) contact uses one to three routes subject to the hub
    degree cap.  Deterministic for a fixed seed.
    """
    if num_hubs < 2:
        raise WorldValidationError("need at least two hubs")
    if bases_per_area < 1:
        raise WorldValidationError("need at least one base per area")
    rng = spawn(seed, "world", num_hubs, bases_per_area)
    agents = [agent_name(i) for i in range(num_hubs)]

    hub_areas: dict[NodeId, list[str]] = {}
    for i in range(num_hubs):
        members = [agents[i], agents[(i + 1) % num_hubs]]
        if num_hubs >= 4 and rng.random() < extra_hub_share_prob:
            others = [a for a in agents if a not in members]
            members.append(others[int(rng.integers(len(others)))])
        hub_areas[hub(i)] = sorted(set(members))

    area_hubs: dict[str, list[NodeId]] = {agent: [] for agent in agents}
    for hub_id, members in hub_areas.items():
        for agent in members:
            area_hubs[agent].append(hub_id)

    def length() -> float:
        return round(float(rng.uniform(MIN_EDGE_LENGTH, MAX_EDGE_LENGTH)), 1)

    areas: dict[str, LocalMap] = {}
    hub_degree = {hub_id: 0 for hub_id in hub_areas}
    for agent in agents:
        bases = [NodeId(agent, i + 1) for i in range(bases_per_area)]
        edges: list[Edge] = []
        for i in range(1, len(bases)):
            j = int(rng.integers(i))
            edges.append(Edge(bases[i], bases[j], length()))
        for i in range(len(bases)):
            for j in range(i + 1, len(bases)):
                if any(e.key == (bases[i], bases[j]) for e in edges):
                    continue
                if rng.random() < extra_edge_prob:
                    edges.append(Edge(bases[i], bases[j], length()))
        for hub_id in sorted(area_hubs[agent]):
            targets = list(rng.permutation(len(bases)))
            first = bases[targets[0]]
            edges.append(Edge(hub_id, first, length()))
            hub_degree[hub_id] += 1
            extra_targets = targets[1:MAX_HUB_AREA_EDGES]
            for t in extra_targets:
                if hub_degree[hub_id] >= MAX_HUB_DEGREE:
                    break
                if rng.random() < 0.4:
                    edges.append(Edge(hub_id, bases[t], length()))
                    hub_degree[hub_id] += 1
        nodes = bases + sorted(area_hubs[agent])
        areas[agent] = LocalMap(owner=agent, nodes=tuple(nodes), edges=tuple(edges))

    capacity = {hub_id: len(members) for hub_id, members in hub_areas.items()}
    return LogisticWorld(agents, areas, capacity)


def random_local_map(num_bases: int, seed: int, num_hubs: int = 2) -> LocalMap:
    """A standalone random area with its hubs, for tests and demos."""
    world = generate_world(max(num_hubs, 2), num_bases, seed)
    agent = world.agents[0]
    area = world._areas[agent]
    if num_hubs < len(area.hubs):
        # Trim to the requested number of hubs, keeping connectivity.
        keep = set(area.bases) | set(area.hubs[:num_hubs])
        edges = tuple(e for e in area.edges if e.u in keep and e.v in keep)
        trimmed = LocalMap(owner=agent, nodes=tuple(sorted(keep)), edges=edges)
        trimmed.validate()
        return trimmed
    return area


# --- serialization ----------------------------------------------------------

def world_to_dict(world: LogisticWorld) -> dict:
    return {
        "agents": list(world.agents),
        "hubs": [
            {"id": str(hub_id), "capacity": capacity}
            for hub_id, capacity in world.hub_capacity.items()
        ],
        "areas": {
            agent: {
                "nodes": [str(n) for n in world._areas[agent].nodes],
                "edges": [
                    {"u": str(e.u), "v": str(e.v), "length": e.length}
                    for e in world._areas[agent].edges
                ],
            }
            for agent in world.agents
        },
    }


def world_from_dict(data: dict) -> LogisticWorld:
    try:
        agents = list(data["agents"])
        hub_entries = data["hubs"]
        area_entries = data["areas"]
    except (KeyError, TypeError) as exc:
        raise WorldValidationError(f"malformed world document: {exc}") from exc
    capacity: dict[NodeId, int] = {}
    for entry in hub_entries:
        hub_id = NodeId.parse(entry["id"])
        if not hub_id.is_hub:
            raise WorldValidationError(f"hub id {entry['id']!r} is not public")
        cap = int(entry["capacity"])
        if cap < 1:
            raise WorldValidationError(f"hub {hub_id} capacity must be positive")
        capacity[hub_id] = cap
    if set(area_entries) != set(agents):
        raise WorldValidationError("area keys do not match the agent list")
    areas: dict[str, LocalMap] = {}
    for agent in agents:
        entry = area_entries[agent]
        nodes = tuple(NodeId.parse(n) for n in entry["nodes"])
        edges = tuple(
            Edge(NodeId.parse(e["u"]), NodeId.parse(e["v"]), float(e["length"]))
            for e in entry["edges"]
        )
        areas[agent] = LocalMap(owner=agent, nodes=nodes, edges=edges)
    return LogisticWorld(agents, areas, capacity)


def dump_world(world: LogisticWorld) -> str:
    return json.dumps(world_to_dict(world), indent=2, sort_keys=True)


def load_world(text: str) -> LogisticWorld:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorldValidationError(f"invalid JSON: {exc}") from exc
    return world_from_dict(data)


# --- showcase fixtures ------------------------------------------------------

def example_local_map() -> LocalMap:
    """Seven-node demo area between two hubs, used in docs and tests.

    Degrees: both hubs and two bases have 2 routes, two bases have 3, one
    base has 4, so the degree counts are (0, 4, 2, 1).
    """
    a, b = hub(0), hub(1)
    n = [NodeId("b", i) for i in range(6)]  # n[1..5] used
    edges = (
        Edge(a, n[1], 50.0),
        Edge(a, n[2], 60.0),
        Edge(n[1], n[2], 40.0),
        Edge(n[1], n[3], 65.0),
        Edge(n[1], b, 80.0),
        Edge(n[2], n[4], 55.0),
        Edge(n[3], n[4], 45.0),
        Edge(n[3], n[5], 75.0),
        Edge(n[5], b, 70.0),
    )
    local = LocalMap(owner="b", nodes=(a, b, n[1], n[2], n[3], n[4], n[5]), edges=edges)
    local.validate()
    return local


def example_world() -> LogisticWorld:
    """Six-agent demo world with a through-route choice, used in docs and tests.

    Agent a borders b, c and d; delivering from a's area to f's area must be
    relayed via e, either through b (hubs pub:0 -> pub:1) or through d
    (pub:3 -> pub:4); the b route is the true optimum.
    """
    A, B, C, D, E, F = (hub(i) for i in range(6))

    def node(agent: str, i: int) -> NodeId:
        return NodeId(agent, i)

    areas = {
        "a": LocalMap(
            owner="a",
            nodes=(A, C, D) + tuple(node("a", i) for i in range(1, 6)),
            edges=(
                Edge(node("a", 1), node("a", 2), 50.0),
                Edge(node("a", 2), node("a", 3), 30.0),
                Edge(node("a", 3), node("a", 4), 30.0),
                Edge(node("a", 4), A, 30.0),
                Edge(node("a", 1), A, 60.0),
                Edge(node("a", 1), C, 40.0),
                Edge(node("a", 4), node("a", 5), 35.0),
                Edge(node("a", 5), D, 40.0),
            ),
        ),
        "b": example_local_map(),
        "c": LocalMap(
            owner="c",
            nodes=(C, node("c", 1), node("c", 2)),
            edges=(
                Edge(C, node("c", 1), 50.0),
                Edge(node("c", 1), node("c", 2), 60.0),
            ),
        ),
        "d": LocalMap(
            owner="d",
            nodes=(D, E, node("d", 1), node("d", 2), node("d", 3)),
            edges=(
                Edge(D, node("d", 1), 80.0),
                Edge(node("d", 1), node("d", 2), 80.0),
                Edge(node("d", 2), E, 80.0),
                Edge(node("d", 1), node("d", 3), 60.0),
            ),
        ),
        "e": LocalMap(
            owner="e",
            nodes=(B, E, F, node("e", 1), node("e", 2), node("e", 3)),
            edges=(
                Edge(B, node("e", 1), 40.0),
                Edge(node("e", 1), E, 40.0),
                Edge(E, node("e", 2), 40.0),
                Edge(node("e", 2), F, 40.0),
                Edge(node("e", 1), node("e", 3), 90.0),
                Edge(node("e", 3), F, 95.0),
            ),
        ),
        "f": LocalMap(
            owner="f",
            nodes=(F,) + tuple(node("f", i) for i in range(1, 5)),
            edges=(
                Edge(F, node("f", 1), 30.0),
                Edge(node("f", 1), node("f", 2), 30.0),
                Edge(node("f", 2), node("f", 4), 30.0),
                Edge(node("f", 1), node("f", 3), 45.0),
            ),
        ),
    }
    capacity = {A: 2, B: 2, C: 2, D: 2, E: 2, F: 2}
    return LogisticWorld(("a", "b", "c", "d", "e", "f"), areas, capacity)
