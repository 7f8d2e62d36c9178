"""Differential-privacy primitives and degree-driven graph rewiring.

Two mechanisms are implemented: integerized Laplace noise on a map's degree
counts (with a rewiring step that realizes the noisy counts as a connected
graph), and the exponential mechanism as a deterministic redistribution of
per-node route-selection probabilities.  A budget ledger couples the privacy
budget to a message allowance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .worlds import (
    DegreeDistribution,
    Edge,
    LocalMap,
    NodeId,
    WorldValidationError,
)


class MechanismError(ValueError):
    """Invalid input to a privacy mechanism."""


@dataclass
class MechanismStats:
    """Process-local invocation counters, used by the privacy audits."""

    laplace_draws: int = 0
    exponential_applications: int = 0
    obfuscations: int = 0

    def reset(self) -> None:
        self.laplace_draws = 0
        self.exponential_applications = 0
        self.obfuscations = 0

    def total(self) -> int:
        return self.laplace_draws + self.exponential_applications + self.obfuscations


stats = MechanismStats()


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget, query sensitivity, and the map's maximum degree."""

    epsilon: float
    d_max: int
    sensitivity: float = 1.0

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise MechanismError("epsilon must be positive")
        if self.d_max < 1:
            raise MechanismError("d_max must be at least 1")
        if not self.sensitivity > 0:
            raise MechanismError("sensitivity must be positive")

    @property
    def noise_scale(self) -> float:
        return self.sensitivity * self.d_max / self.epsilon


def sample_laplace(scale: float, rng: np.random.Generator) -> float:
    """One draw from the zero-mean Laplace distribution with the given scale."""
    if not scale > 0:
        raise MechanismError("scale must be positive")
    stats.laplace_draws += 1
    return float(rng.laplace(0.0, scale))


def obfuscate_degree_distribution(
    dist: DegreeDistribution,
    params: PrivacyParams,
    rng: np.random.Generator,
) -> DegreeDistribution:
    """Perturb each degree count with integerized Laplace noise.

    Each count independently receives the ceiling of a Laplace draw at scale
    sensitivity * d_max / epsilon and is clamped at zero.  Degenerate results
    with fewer than two nodes in total are re-drawn, since a map needs at
    least its two boundary hubs.  Note the ceiling rounds toward positive
    infinity, so even a huge epsilon leaves a +1 on roughly half the bins.
    """
    stats.obfuscations += 1
    scale = params.noise_scale
    for _ in range(1000):
        noisy = tuple(
            max(0, c + math.ceil(sample_laplace(scale, rng))) for c in dist.counts
        )
        if sum(noisy) >= 2:
            return DegreeDistribution(noisy)
    raise MechanismError("could not draw a usable noisy distribution")


# --- degree-sequence rewiring -----------------------------------------------

@dataclass(frozen=True)
class RewiredMap:
    """Unweighted rewired topology plus the repairs applied to realize it."""

    owner: str
    nodes: tuple[NodeId, ...]
    edges: tuple[tuple[NodeId, NodeId], ...]
    repairs: tuple[str, ...]

    def adjacency(self) -> dict[NodeId, list[NodeId]]:
        adj: dict[NodeId, list[NodeId]] = {n: [] for n in sorted(self.nodes)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for nbrs in adj.values():
            nbrs.sort()
        return adj


def _havel_hakimi(degrees: Sequence[int]) -> set[tuple[int, int]] | None:
    """Construct a simple graph with the exact degree sequence, or None."""
    remaining = [[d, i] for i, d in enumerate(degrees)]
    edges: set[tuple[int, int]] = set()
    while True:
        remaining.sort(key=lambda item: (-item[0], item[1]))
        d, node = remaining[0]
        if d == 0:
            return edges
        if d > len(remaining) - 1:
            return None
        targets = remaining[1 : d + 1]
        if any(t[0] == 0 for t in targets):
            return None
        remaining[0][0] = 0
        for t in targets:
            t[0] -= 1
            edges.add((min(node, t[1]), max(node, t[1])))


def _repair_degree_sequence(
    degrees: list[int], min_nodes: int
) -> tuple[list[int], list[str]]:
    """Minimally adjust a degree sequence until it has a connected realization.

    Needed properties: at least ``min_nodes`` entries, every degree in
    [1, n-1], even sum, sum >= 2(n-1), and graphical per Havel-Hakimi.
    """
    repairs: list[str] = []
    degrees = sorted(degrees, reverse=True)
    floor = max(min_nodes, 2)
    while len(degrees) < floor:
        degrees.append(1)
        repairs.append("added a degree-1 slot to reach the minimum node count")
    n = len(degrees)
    capped = [min(d, n - 1) for d in degrees]
    if capped != degrees:
        repairs.append("capped degrees at n-1")
        degrees = capped

    def bump_smallest() -> bool:
        for i in range(n - 1, -1, -1):
            if degrees[i] < n - 1:
                degrees[i] += 1
                return True
        return False

    while sum(degrees) < 2 * (n - 1):
        if not bump_smallest():
            break
        repairs.append("raised a low degree to keep a connected realization possible")
    if sum(degrees) % 2 == 1:
        if not bump_smallest():
            degrees[0] -= 1
        repairs.append("adjusted one degree to fix parity")
    degrees.sort(reverse=True)

    while _havel_hakimi(degrees) is None:
        # Move one unit from the largest to the smallest compatible entry;
        # this keeps the sum and converges to a near-regular sequence.
        degrees.sort(reverse=True)
        moved = False
        for j in range(n - 1, 0, -1):
            if degrees[j] < degrees[0] - 1 and degrees[j] < n - 1:
                degrees[0] -= 1
                degrees[j] += 1
                moved = True
                break
        if not moved:
            degrees[0] = max(1, degrees[0] - 1)
            degrees[1] = max(1, degrees[1] - 1)
        repairs.append("rebalanced degrees toward a graphical sequence")
    return degrees, repairs


def _randomize_edges(
    edges: set[tuple[int, int]], rng: np.random.Generator, attempts: int
) -> set[tuple[int, int]]:
    """Degree-preserving double edge swaps; rejects loops and duplicates."""
    edges = set(edges)
    for _ in range(attempts):
        if len(edges) < 2:
            break
        ordered = sorted(edges)
        first = ordered[int(rng.integers(len(ordered)))]
        second = ordered[int(rng.integers(len(ordered)))]
        if first == second:
            continue
        a, b = first
        c, d = second
        if rng.random() < 0.5:
            c, d = d, c
        new_one = (min(a, c), max(a, c))
        new_two = (min(b, d), max(b, d))
        if new_one[0] == new_one[1] or new_two[0] == new_two[1]:
            continue
        if new_one in edges or new_two in edges:
            continue
        edges.discard(first)
        edges.discard(second)
        edges.add(new_one)
        edges.add(new_two)
    return edges


def _components(n: int, edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen: set[int] = set()
    comps: list[list[int]] = []
    for start in range(n):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        stack = [start]
        while stack:
            cur = stack.pop()
            for nbr in adj[cur]:
                if nbr not in seen:
                    seen.add(nbr)
                    comp.append(nbr)
                    stack.append(nbr)
        comps.append(sorted(comp))
    return comps


def _is_cycle_edge(
    edge: tuple[int, int], comp: list[int], edges: set[tuple[int, int]]
) -> bool:
    """True if the component stays connected without the edge."""
    nodes = set(comp)
    adj: dict[int, list[int]] = {node: [] for node in comp}
    for u, v in edges:
        if u in nodes and (u, v) != edge:
            adj[u].append(v)
            adj[v].append(u)
    start = comp[0]
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for nbr in adj[cur]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return len(seen) == len(nodes)


def _connect_components(
    n: int, edges: set[tuple[int, int]]
) -> set[tuple[int, int]]:
    """Merge components with cross-component edge swaps (degree preserving).

    One of the two swapped edges must lie on a cycle, so that removing it
    cannot split its component; a cyclic component always exists while the
    graph is disconnected, because the degree sum is at least 2(n-1).
    """
    edges = set(edges)
    while True:
        comps = _components(n, edges)
        if len(comps) <= 1:
            return edges
        comp_of = {}
        for idx, comp in enumerate(comps):
            for node in comp:
                comp_of[node] = idx
        by_comp: dict[int, list[tuple[int, int]]] = {idx: [] for idx in range(len(comps))}
        for edge in sorted(edges):
            by_comp[comp_of[edge[0]]].append(edge)
        cycle_edge = None
        cycle_comp = None
        for idx, comp in enumerate(comps):
            if len(by_comp[idx]) >= len(comp):
                for edge in by_comp[idx]:
                    if _is_cycle_edge(edge, comp, edges):
                        cycle_edge, cycle_comp = edge, idx
                        break
            if cycle_edge is not None:
                break
        if cycle_edge is None:
            # Every degree is >= 1 and the sum is >= 2(n-1), so a cyclic
            # component must exist; reaching this point means the caller
            # passed an unrepaired sequence.
            raise MechanismError("cannot connect rewired graph")
        other = next(idx for idx in range(len(comps)) if idx != cycle_comp and by_comp[idx])
        (a, b) = cycle_edge
        (c, d) = by_comp[other][0]
        edges.discard((a, b))
        edges.discard((c, d))
        edges.add((min(a, c), max(a, c)))
        edges.add((min(b, d), max(b, d)))


def rewire_to_distribution(
    original: LocalMap,
    target: DegreeDistribution,
    rng: np.random.Generator,
) -> RewiredMap:
    """Build a connected graph realizing the target degree counts.

    All hubs of the original map keep their identity in the output; real base
    identities are reused as far as the target node count allows, and extra
    slots become fake bases with fresh indices.  Non-graphical targets are
    repaired by the minimal adjustments recorded in the result.
    """
    if target.total_nodes < 2:
        raise MechanismError("target distribution needs at least two nodes")
    hubs = list(original.hubs)
    degree_list = [
        k for k, count in enumerate(target.counts, start=1) for _ in range(count)
    ]
    degrees, repairs = _repair_degree_sequence(degree_list, min_nodes=len(hubs))
    n = len(degrees)
    if n > target.total_nodes:
        repairs.append("node count raised to keep all hubs")

    bases = list(original.bases)
    identities: list[NodeId] = list(hubs)
    reusable = [bases[i] for i in rng.permutation(len(bases))]
    identities.extend(reusable[: max(0, n - len(identities))])
    next_index = max((b.index for b in bases), default=0) + 1
    while len(identities) < n:
        identities.append(NodeId(original.owner, next_index))
        next_index += 1

    edges = _havel_hakimi(degrees)
    assert edges is not None  # repaired sequence is graphical
    edges = _randomize_edges(edges, rng, attempts=4 * max(1, len(edges)))
    edges = _connect_components(n, edges)

    slot_of = rng.permutation(n)
    node_for_slot = {int(slot_of[i]): identities[i] for i in range(n)}
    named_edges = []
    for u, v in sorted(edges):
        a, b = node_for_slot[u], node_for_slot[v]
        named_edges.append((a, b) if a < b else (b, a))
    return RewiredMap(
        owner=original.owner,
        nodes=tuple(sorted(node_for_slot.values())),
        edges=tuple(sorted(named_edges)),
        repairs=tuple(repairs),
    )


def assign_fake_lengths(
    rewired: RewiredMap, original: LocalMap, rng: np.random.Generator
) -> LocalMap:
    """Give rewired edges lengths: true ones where the edge is real.

    Edges also present in the original keep their true length; new edges get
    a length drawn uniformly from [0.8, 1.2] times the original map's average
    route length.
    """
    if not original.edges:
        raise MechanismError("original map has no edges")
    true_length = {e.key: e.length for e in original.edges}
    avg = original.average_length()
    edges = []
    for key in rewired.edges:
        if key in true_length:
            edges.append(Edge(key[0], key[1], true_length[key]))
        else:
            edges.append(Edge(key[0], key[1], float(rng.uniform(0.8 * avg, 1.2 * avg))))
    return LocalMap(owner=rewired.owner, nodes=rewired.nodes, edges=tuple(edges))


# --- exponential mechanism ---------------------------------------------------

def exponential_redistribute(
    probs: Sequence[float], epsilon: float
) -> tuple[float, ...]:
    """Reweight a probability vector by exp(epsilon * p / 2), normalized.

    The utility of an option is its current probability and the utility
    sensitivity is 1, so the mechanism is the deterministic map
    p_i -> exp(eps * p_i / 2) / sum_j exp(eps * p_j / 2).  epsilon 0 yields
    the uniform vector; epsilon -> infinity concentrates on the argmax.
    """
    if len(probs) == 0:
        raise MechanismError("empty probability vector")
    if any(not 0 < p <= 1 for p in probs):
        raise MechanismError("probabilities must lie in (0, 1]")
    if abs(sum(probs) - 1.0) > 1e-6:
        raise MechanismError("probabilities must sum to 1")
    if epsilon < 0:
        raise MechanismError("epsilon must be non-negative")
    stats.exponential_applications += 1
    top = max(probs)
    weights = [math.exp(epsilon * (p - top) / 2.0) for p in probs]
    total = sum(weights)
    return tuple(w / total for w in weights)


def fixed_point_epsilons(probs: Sequence[float]) -> tuple[float, ...] | None:
    """Budget values at which the redistribution reproduces its input.

    Returns one value per entry; for two options the values coincide and the
    redistribution is exactly invariant there.  A uniform (or single-entry)
    vector is invariant for every budget, signalled by ``None``.  Entries
    must be pairwise distinct and different from 1/k, otherwise the defining
    equations degenerate.
    """
    k = len(probs)
    if k == 0:
        raise MechanismError("empty probability vector")
    if any(not 0 < p < 1 for p in probs) and k > 1:
        raise MechanismError("probabilities must lie in (0, 1)")
    if abs(sum(probs) - 1.0) > 1e-6:
        raise MechanismError("probabilities must sum to 1")
    if k == 1:
        return None
    if max(probs) - min(probs) < 1e-12:
        return None
    if len({round(p, 12) for p in probs}) != k:
        raise MechanismError("entries must be pairwise distinct")
    total = sum(probs)
    log_sum = sum(math.log(p) for p in probs)
    out = []
    for p in probs:
        denom = k * p - total
        if abs(denom) < 1e-12:
            raise MechanismError(f"entry {p} equals 1/k; fixed point undefined")
        out.append(2.0 * (k * math.log(p) - log_sum) / denom)
    return tuple(out)


# --- budget ledger ------------------------------------------------------------

class LedgerExhausted(RuntimeError):
    """Raised only by :meth:`BudgetLedger.spend`; protocols use try_spend."""


class BudgetLedger:
    """Per-agent coupling of the privacy budget to a message allowance.

    The total budget epsilon is split over a communication budget of C
    messages, epsilon / C each; after C spends the ledger reports exhaustion
    and further communication is a protocol failure, not a crash.
    """

    def __init__(self, epsilon_total: float, capacity: int) -> None:
        if not epsilon_total > 0:
            raise MechanismError("epsilon budget must be positive")
        if capacity < 1:
            raise MechanismError("communication budget must be at least 1")
        self.epsilon_total = float(epsilon_total)
        self.capacity = int(capacity)
        self.spent = 0

    @property
    def per_message(self) -> float:
        return self.epsilon_total / self.capacity

    @property
    def remaining(self) -> int:
        return self.capacity - self.spent

    @property
    def exhausted(self) -> bool:
        return self.spent >= self.capacity

    @property
    def spent_epsilon(self) -> float:
        return self.spent * self.per_message

    def try_spend(self, messages: int = 1) -> bool:
        """Consume budget for ``messages`` sends; False reports exhaustion."""
        if messages < 0:
            raise MechanismError("cannot spend a negative amount")
        if self.spent + messages > self.capacity:
            self.spent = self.capacity
            return False
        self.spent += messages
        return True

    def spend(self, messages: int = 1) -> None:
        if not self.try_spend(messages):
            raise LedgerExhausted(
                f"budget exhausted after {self.capacity} messages"
            )


# --- obfuscated map -----------------------------------------------------------

@dataclass(frozen=True)
class ObfuscatedMap:
    """Rewired area with per-node route probabilities and no lengths.

    ``route_probabilities[node]`` is aligned with the node's lexicographically
    sorted neighbour list.  The map keeps the owner's public hubs so that it
    can be stitched to other areas, but reveals neither true topology nor any
    route length.
    """

    owner: str
    nodes: tuple[NodeId, ...]
    edges: tuple[tuple[NodeId, NodeId], ...]
    entry: NodeId
    exit: NodeId
    route_probabilities: dict[NodeId, tuple[float, ...]]
    repairs: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def adjacency_nodes(self) -> dict[NodeId, list[NodeId]]:
        adj: dict[NodeId, list[NodeId]] = {n: [] for n in sorted(self.nodes)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for nbrs in adj.values():
            nbrs.sort()
        return adj

    @property
    def hubs(self) -> tuple[NodeId, ...]:
        return tuple(n for n in self.nodes if n.is_hub)

    def validate(self) -> None:
        from .worlds import is_connected  # local import to avoid cycle at module load

        if self.entry not in self.nodes or self.exit not in self.nodes:
            raise WorldValidationError("obfuscated map lost its boundary hubs")
        adj = self.adjacency_nodes()
        if any(not nbrs for nbrs in adj.values()):
            raise WorldValidationError("obfuscated map has an isolated node")
        probe_edges = [Edge(u, v, 1.0) for u, v in self.edges]
        if not is_connected(self.nodes, probe_edges):
            raise WorldValidationError("obfuscated map is not connected")
        for node, nbrs in adj.items():
            vector = self.route_probabilities.get(node)
            if vector is None or len(vector) != len(nbrs):
                raise WorldValidationError(f"bad probability vector at {node}")
            if abs(sum(vector) - 1.0) > 1e-9:
                raise WorldValidationError(f"probabilities at {node} do not sum to 1")
            if any(not 0 < p <= 1 for p in vector):
                raise WorldValidationError(f"probability out of range at {node}")

    def to_dict(self) -> dict:
        return {
            "owner": self.owner,
            "entry": str(self.entry),
            "exit": str(self.exit),
            "nodes": [str(n) for n in self.nodes],
            "edges": [[str(u), str(v)] for u, v in self.edges],
            "route_probabilities": {
                str(node): list(vector)
                for node, vector in sorted(self.route_probabilities.items())
            },
            "repairs": list(self.repairs),
        }
