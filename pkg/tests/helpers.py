"""Shared test utilities: random graphs, scenario builders, independent oracles."""

from collections import deque

import numpy as np

from bittide_sim.afm import AfmScenario
from bittide_sim.graph import OrientedGraph
from bittide_sim.ode import Gains


def random_connected_graph(rng: np.random.RandomState, n: int,
                           extra_edges: int | None = None) -> OrientedGraph:
    """Random spanning tree plus extra edges; always connected."""
    order = list(range(n))
    rng.shuffle(order)
    edges = set()
    for k in range(1, n):
        u = order[rng.randint(0, k)]
        v = order[k]
        edges.add((min(u, v), max(u, v)))
    if extra_edges is None:
        extra_edges = n
    for _ in range(extra_edges):
        u, v = rng.randint(0, n), rng.randint(0, n)
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return OrientedGraph(n, tuple(sorted(edges)))


def union_find_connected(n: int, edges) -> bool:
    """Independent connectivity oracle (no spectral machinery)."""
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in edges:
        parent[find(u)] = find(v)
    return len({find(i) for i in range(n)}) == 1


def bfs_distance(g: OrientedGraph, src: int, dst: int) -> int:
    """Unweighted shortest-path oracle."""
    if src == dst:
        return 0
    dist = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                if v == dst:
                    return dist[v]
                queue.append(v)
    return -1


def make_scenario(graph: OrientedGraph, omega_u, gains: Gains, *,
                  latency=0.0, p=1000.0, d=0.0, theta0=0.1,
                  beta_max=128, t_end=20000.0, output_dt=500.0,
                  omega_min=0.5, omega_max=2.0, beta0=None) -> AfmScenario:
    n = graph.n
    n_links = 2 * graph.m
    omega_u = tuple(float(w) for w in omega_u)
    if isinstance(latency, (int, float)):
        latency = (float(latency),) * n_links
    if beta0 is None:
        beta0 = beta_max // 2
    if isinstance(beta0, int):
        beta0 = (beta0,) * n_links
    if isinstance(theta0, (int, float)):
        theta0 = (float(theta0),) * n
    epoch = -(max(latency, default=0.0) + d / omega_min) - 1.0
    return AfmScenario(
        graph=graph,
        uncorrected_freq=omega_u,
        initial_phase=theta0,
        startup_freq=omega_u,
        prehistory_freq=omega_u,
        initial_occupancy=tuple(beta0),
        buffer_capacity=beta_max,
        latency=tuple(latency),
        meas_period=float(p),
        actuation_delay=float(d),
        gains=gains,
        omega_min=omega_min,
        omega_max=omega_max,
        t_end=float(t_end),
        output_dt=float(output_dt),
        epoch=epoch,
    )
