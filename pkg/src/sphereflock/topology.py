"""Coordination graph and the state-dependent distance graph.

Two graphs live side by side: a fixed directed graph G that carries the
coordination strategy (edge (j, i) means agent i observes agent j), and an
undirected, state-dependent graph G' that links every pair of bodies whose
geodesic distance is at most the awareness distance D_a.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dynamics import NetworkState


@dataclass(frozen=True)
class DirectedGraph:
    """Fixed coordination topology over nodes 0..n-1."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        for j, i in self.edges:
            if j == i:
                raise ValueError(f"self-loop ({j}, {i}) not allowed")
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ValueError(f"edge ({j}, {i}) outside node range [0, {self.n})")


@dataclass(frozen=True)
class DistanceGraphParams:
    """Radii defining collisions (D_c) and awareness (D_a) on a sphere of radius rho."""

    D_a: float
    D_c: float
    rho: float

    def __post_init__(self) -> None:
        if not (0.0 < self.D_c < self.D_a < (self.rho * math.pi) / 2.0):
            raise ValueError(
                f"need 0 < D_c < D_a < rho*pi/2, got D_c={self.D_c}, "
                f"D_a={self.D_a}, rho*pi/2={self.rho * math.pi / 2.0}")


def neighbors(g: DirectedGraph, i: int) -> set[int]:
    """In-neighbor set of node i: all j with an edge (j, i)."""
    if not (0 <= i < g.n):
        raise ValueError(f"node {i} outside range [0, {g.n})")
    return {j for j, k in g.edges if k == i}


def _reachable(n: int, adj: list[list[int]], start: int) -> bool:
    seen = [False] * n
    seen[start] = True
    queue = deque([start])
    count = 1
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == n


def is_strongly_connected(g: DirectedGraph) -> bool:
    """True iff every node reaches every other along directed edges."""
    fwd: list[list[int]] = [[] for _ in range(g.n)]
    rev: list[list[int]] = [[] for _ in range(g.n)]
    for j, i in g.edges:
        fwd[j].append(i)
        rev[i].append(j)
    return _reachable(g.n, fwd, 0) and _reachable(g.n, rev, 0)


def distance_neighbors(state: NetworkState, params: DistanceGraphParams, i: int) -> set[int]:
    """Agents within geodesic distance D_a of agent i (boundary inclusive).

    The threshold is evaluated in the cosine domain, e3^T R_i^T R_j e3 >=
    cos(D_a / rho), which is the same set as d_g <= D_a but exact at the
    boundary.
    """
    if not (0 <= i < state.n):
        raise ValueError(f"node {i} outside range [0, {state.n})")
    if abs(state.rho - params.rho) > 1e-12:
        raise ValueError("params.rho does not match state.rho")
    cos_da = math.cos(params.D_a / params.rho)
    zi = state.agents[i].attitude[:, 2]
    out = set()
    for j, agent in enumerate(state.agents):
        if j == i:
            continue
        if float(zi @ agent.attitude[:, 2]) >= cos_da:
            out.add(j)
    return out


def cycle_graph(n: int) -> DirectedGraph:
    """Directed n-cycle 0 -> 1 -> ... -> n-1 -> 0 (minimal strongly connected)."""
    if n < 2:
        raise ValueError("cycle needs at least two nodes")
    return DirectedGraph(n=n, edges=frozenset((i, (i + 1) % n) for i in range(n)))


def complete_graph(n: int) -> DirectedGraph:
    """All ordered pairs (j, i), j != i."""
    if n < 2:
        raise ValueError("complete graph needs at least two nodes")
    return DirectedGraph(
        n=n, edges=frozenset((j, i) for j in range(n) for i in range(n) if j != i))


def random_strongly_connected(n: int, extra_edges: int, rng: np.random.Generator) -> DirectedGraph:
    """Directed cycle plus extra distinct random edges drawn from rng.

    The cycle guarantees strong connectivity; the extra edges raise
    connectivity (and coordination convergence speed) in a seeded,
    reproducible way.
    """
    if n < 2:
        raise ValueError("graph needs at least two nodes")
    edges = {(i, (i + 1) % n) for i in range(n)}
    candidates = [(j, i) for j in range(n) for i in range(n)
                  if j != i and (j, i) not in edges]
    extra = min(extra_edges, len(candidates))
    if extra > 0:
        picked = rng.choice(len(candidates), size=extra, replace=False)
        for idx in sorted(int(k) for k in picked):
            edges.add(candidates[idx])
    return DirectedGraph(n=n, edges=frozenset(edges))
