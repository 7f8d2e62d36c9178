"""Learning per-node route-selection distributions over a weighted map.

A tabular learner walks the map from an entry hub to an exit hub, updating a
per-(node, route) quality table and nudging each node's selection
probabilities toward the better-rated routes.  Quality values, rewards and
the initial probabilities are all inversely proportional to route length, so
cheap routes start attractive and stay reinforced.  The learned
probabilities later replace the length labels entirely; an inverse mapping
recovers relative distance estimates from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .worlds import Edge, LocalMap, NodeId


class LearningError(ValueError):
    pass


@dataclass
class LearnStats:
    """Process-local counters used by the no-learning instrumentation."""

    runs: int = 0

    def reset(self) -> None:
        self.runs = 0


stats = LearnStats()


@dataclass(frozen=True)
class LearningParams:
    alpha: float = 0.1
    gamma: float = 0.9
    zeta: float = 0.95
    episodes: int = 500
    reward_scale: float = 200.0
    q_init_scale: float = 100.0
    probability_floor: float = 1e-4

    def __post_init__(self) -> None:
        if not 0 <= self.alpha <= 1:
            raise LearningError("alpha must lie in [0, 1]")
        if not 0 <= self.gamma < 1:
            raise LearningError("gamma must lie in [0, 1)")
        if not 0 < self.zeta <= 1:
            raise LearningError("zeta must lie in (0, 1]")
        if self.episodes < 1:
            raise LearningError("need at least one episode")
        if self.reward_scale <= 0 or self.q_init_scale <= 0:
            raise LearningError("scales must be positive")
        if not 0 < self.probability_floor < 1e-2:
            raise LearningError("probability floor out of range")


@dataclass
class Policy:
    """Per-node selection probabilities, aligned with sorted neighbour lists."""

    neighbors: dict[NodeId, tuple[NodeId, ...]]
    pi: dict[NodeId, tuple[float, ...]]
    diagnostics: dict = field(default_factory=dict)

    def probability(self, node: NodeId, nbr: NodeId) -> float:
        return self.pi[node][self.neighbors[node].index(nbr)]

    def best_neighbor(self, node: NodeId) -> NodeId:
        vector = self.pi[node]
        return self.neighbors[node][vector.index(max(vector))]

    def validate(self) -> None:
        for node, vector in self.pi.items():
            if len(vector) != len(self.neighbors[node]):
                raise LearningError(f"misaligned vector at {node}")
            if abs(sum(vector) - 1.0) > 1e-9:
                raise LearningError(f"probabilities at {node} do not sum to 1")
            if any(not 0 < p <= 1 for p in vector):
                raise LearningError(f"probability out of range at {node}")


@dataclass
class QTable:
    """Route quality per (node, incident route)."""

    neighbors: dict[NodeId, tuple[NodeId, ...]]
    q: dict[NodeId, list[float]]

    def value(self, node: NodeId, nbr: NodeId) -> float:
        return self.q[node][self.neighbors[node].index(nbr)]


def _neighbor_lengths(local_map: LocalMap) -> dict[NodeId, list[tuple[NodeId, float]]]:
    adj = local_map.adjacency()
    if any(not nbrs for nbrs in adj.values()):
        raise LearningError("map has an isolated node")
    return adj


def init_policy(local_map: LocalMap) -> Policy:
    """Initial probabilities proportional to inverse route length."""
    adj = _neighbor_lengths(local_map)
    neighbors = {}
    pi = {}
    for node, nbrs in adj.items():
        weights = [1.0 / length for _, length in nbrs]
        total = sum(weights)
        neighbors[node] = tuple(n for n, _ in nbrs)
        pi[node] = tuple(w / total for w in weights)
    return Policy(neighbors=neighbors, pi=pi)


def init_q(local_map: LocalMap, q_init_scale: float = 100.0) -> QTable:
    """Initial quality of a route is q_init_scale / length: shorter is better."""
    adj = _neighbor_lengths(local_map)
    neighbors = {node: tuple(n for n, _ in nbrs) for node, nbrs in adj.items()}
    q = {
        node: [q_init_scale / length for _, length in nbrs]
        for node, nbrs in adj.items()
    }
    return QTable(neighbors=neighbors, q=q)


def reward(edge: Edge, reward_scale: float = 200.0) -> float:
    """Per-step reward, inversely proportional to the route length."""
    return reward_scale / edge.length


def q_update(
    q: QTable,
    node: NodeId,
    nbr: NodeId,
    next_node: NodeId,
    r: float,
    params: LearningParams,
) -> QTable:
    """Blend the old value with reward plus discounted best next value."""
    i = q.neighbors[node].index(nbr)
    best_next = max(q.q[next_node])
    q.q[node][i] = (1.0 - params.alpha) * q.q[node][i] + params.alpha * (
        r + params.gamma * best_next
    )
    return q


def policy_update(
    policy: Policy, q: QTable, node: NodeId, params: LearningParams
) -> Policy:
    """Shift probabilities toward routes rated above the node's mean value."""
    vector = list(policy.pi[node])
    values = q.q[node]
    mean_value = sum(p * v for p, v in zip(vector, values))
    floor = params.probability_floor
    for i, value in enumerate(values):
        vector[i] = min(1.0, max(floor, vector[i] + params.zeta * (value - mean_value)))
    total = sum(vector)
    policy.pi[node] = tuple(p / total for p in vector)
    return policy


def learn_route_distribution(
    local_map: LocalMap,
    entry: NodeId,
    exit: NodeId,
    params: LearningParams,
    rng: np.random.Generator,
) -> Policy:
    """Run repeated entry-to-exit walks and return the learned policy.

    Each episode samples routes from the current probabilities, applies the
    quality and probability updates at every step, and ends on reaching the
    exit.  Episodes exceeding nodes^2 steps are truncated, counted, and
    restarted.  Diagnostics carry episode and truncation counts.
    """
    if entry == exit:
        raise LearningError("entry and exit must differ")
    stats.runs += 1
    adj = _neighbor_lengths(local_map)
    if entry not in adj or exit not in adj:
        raise LearningError("entry or exit not on the map")
    nodes = sorted(adj)
    index = {node: i for i, node in enumerate(nodes)}
    nbr_idx = [[index[n] for n, _ in adj[node]] for node in nodes]
    rewards = [[params.reward_scale / length for _, length in adj[node]] for node in nodes]
    q = [[params.q_init_scale / length for _, length in adj[node]] for node in nodes]
    pi: list[list[float]] = []
    for node in nodes:
        weights = [1.0 / length for _, length in adj[node]]
        total = sum(weights)
        pi.append([w / total for w in weights])

    alpha, gamma, zeta = params.alpha, params.gamma, params.zeta
    floor = params.probability_floor
    start, goal = index[entry], index[exit]
    step_cap = len(nodes) * len(nodes)
    truncations = 0
    total_steps = 0

    for _ in range(params.episodes):
        v = start
        steps = 0
        draws = rng.random(step_cap)
        while v != goal:
            if steps >= step_cap:
                truncations += 1
                break
            draw = draws[steps]
            vector = pi[v]
            choice = 0
            acc = vector[0]
            while acc < draw and choice < len(vector) - 1:
                choice += 1
                acc += vector[choice]
            nxt = nbr_idx[v][choice]
            r = rewards[v][choice]
            qv = q[v]
            qv[choice] = (1.0 - alpha) * qv[choice] + alpha * (r + gamma * max(q[nxt]))
            mean_value = 0.0
            for p, value in zip(vector, qv):
                mean_value += p * value
            total = 0.0
            for i, value in enumerate(qv):
                p = vector[i] + zeta * (value - mean_value)
                if p < floor:
                    p = floor
                elif p > 1.0:
                    p = 1.0
                vector[i] = p
                total += p
            for i in range(len(vector)):
                vector[i] /= total
            v = nxt
            steps += 1
        total_steps += steps

    neighbors = {node: tuple(n for n, _ in adj[node]) for node in nodes}
    learned = {
        nodes[i]: tuple(pi[i]) for i in range(len(nodes))
    }
    policy = Policy(
        neighbors=neighbors,
        pi=learned,
        diagnostics={
            "episodes": params.episodes,
            "truncations": truncations,
            "steps": total_steps,
        },
    )
    policy.validate()
    return policy


def greedy_walk(
    policy: Policy, entry: NodeId, exit: NodeId, max_steps: int | None = None
) -> list[NodeId] | None:
    """Follow the most probable route at each node; None on revisits."""
    if max_steps is None:
        max_steps = len(policy.neighbors) + 1
    path = [entry]
    seen = {entry}
    node = entry
    for _ in range(max_steps):
        if node == exit:
            return path
        node = policy.best_neighbor(node)
        if node in seen:
            return None
        seen.add(node)
        path.append(node)
    return path if node == exit else None


def estimate_distances(
    probs: list[float] | tuple[float, ...], local_avg_length: float
) -> tuple[float, ...]:
    """Invert a node's selection probabilities into distance estimates.

    With normalized shares s_i the estimate is avg * k * (1 - s_i) / (k - 1):
    affine in the share, mean-preserving (the estimates average to the local
    average length), and higher probability maps to a shorter route.  A
    single-route node gets the average itself.
    """
    if not local_avg_length > 0:
        raise LearningError("average length must be positive")
    k = len(probs)
    if k == 0:
        raise LearningError("empty probability vector")
    if any(p <= 0 for p in probs):
        raise LearningError("probabilities must be positive")
    if k == 1:
        return (local_avg_length,)
    total = sum(probs)
    return tuple(
        local_avg_length * k * (1.0 - p / total) / (k - 1) for p in probs
    )
