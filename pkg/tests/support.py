"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np

from fusionroute.netgraph import Edge, Network, Node, NodeKind, edge_key
from fusionroute.rate import FlowGraph, WidthedPath, make_path


def build_net(
    users: int,
    switches: int,
    edges: list[tuple[int, int, float]],
    *,
    capacity: int = 10,
    q: float = 0.9,
    qs: dict[int, float] | None = None,
    caps: dict[int, int] | None = None,
) -> Network:
    """Hand-built network: user ids first, explicit link probabilities."""
    nodes = [Node(i, NodeKind.USER, float(i), 0.0) for i in range(users)]
    for j in range(switches):
        nid = users + j
        nodes.append(
            Node(
                nid,
                NodeKind.SWITCH,
                float(nid),
                1.0,
                capacity=(caps or {}).get(nid, capacity),
                swap_prob=(qs or {}).get(nid, q),
            )
        )
    return Network(nodes, [Edge(u, v, 1.0, p) for (u, v, p) in edges])


def relay_net(p: float, q: float, capacity: int = 10) -> Network:
    """Users 0, 1 with a single relay switch 2."""
    return build_net(2, 1, [(0, 2, p), (2, 1, p)], capacity=capacity, q=q)


def chain_net(hops: int, p: float, q: float, capacity: int = 100) -> Network:
    """Users 0, 1 joined by a chain of hops-1 switches."""
    switches = hops - 1
    inner = list(range(2, 2 + switches))
    seq = [0] + inner + [1]
    edges = [(a, b, p) for a, b in zip(seq, seq[1:])]
    return build_net(2, switches, edges, capacity=capacity, q=q)


def chain_nodes(hops: int) -> tuple[int, ...]:
    return tuple([0] + list(range(2, 2 + hops - 1)) + [1])


def two_lane_net(p: float, q: float, capacity: int = 2) -> Network:
    """Users 0, 1 with two disjoint relay switches 2 and 3."""
    return build_net(2, 2, [(0, 2, p), (2, 1, p), (0, 3, p), (3, 1, p)], capacity=capacity, q=q)


def flow_graph_from(net: Network, demand_id: int, paths: list[tuple[tuple[int, ...], int]]) -> FlowGraph:
    """Flow graph from explicit (nodes, width) member paths."""
    source, dest = paths[0][0][0], paths[0][0][-1]
    fg = FlowGraph(demand_id, source, dest)
    for nodes, width in paths:
        for a, b in zip(nodes, nodes[1:]):
            key = edge_key(a, b)
            fg.channels[key] = max(fg.channels.get(key, 0), width)
            fg.orientation[key] = (a, b)
        fg.members.append(make_path(net, nodes, width))
    return fg


def bridge_flow_graph(p: float, q: float) -> tuple[Network, FlowGraph]:
    """Smallest non-series-parallel flow graph (a cross link between lanes)."""
    net = build_net(2, 2, [(0, 2, p), (2, 1, p), (0, 3, p), (3, 1, p), (2, 3, p)], q=q)
    fg = flow_graph_from(net, 0, [((0, 2, 1), 1), ((0, 3, 1), 1), ((0, 2, 3, 1), 1)])
    return net, fg


# ---------------------------------------------------------------------------
# Brute-force path oracles


def all_simple_paths(net: Network, source: int, dest: int) -> list[tuple[int, ...]]:
    """Every simple source-dest path whose interior nodes are switches."""
    out: list[tuple[int, ...]] = []

    def walk(node: int, seen: tuple[int, ...]):
        for nbr in net.neighbors(node):
            if nbr in seen:
                continue
            if nbr == dest:
                out.append(seen + (dest,))
            elif net.is_switch(nbr):
                walk(nbr, seen + (nbr,))

    walk(source, (source,))
    return out


def feasible_paths(
    net: Network, source: int, dest: int, width: int, caps: dict[int, int]
) -> list[tuple[int, ...]]:
    paths = []
    for nodes in all_simple_paths(net, source, dest):
        if all(caps.get(v, 0) >= 2 * width for v in nodes if net.is_switch(v)):
            paths.append(nodes)
    return paths


def ranked_paths(
    net: Network, source: int, dest: int, width: int, caps: dict[int, int]
) -> list[WidthedPath]:
    """All feasible paths ranked by (metric desc, hops asc, sequence asc)."""
    paths = [make_path(net, nodes, width) for nodes in feasible_paths(net, source, dest, width, caps)]
    paths.sort(key=lambda p: (-p.metric, len(p.nodes), p.nodes))
    return paths


def random_small_net(rng: np.random.Generator, max_nodes: int = 8) -> Network:
    """Random connected graph with two users, for exhaustive comparisons."""
    n = int(rng.integers(4, max_nodes + 1))
    while True:
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                if i == 0 and j == 1 and rng.random() > 0.25:
                    continue  # direct user-user edge kept rare
                if rng.random() < 0.5:
                    edges.append((i, j, float(rng.uniform(0.3, 0.95))))
        caps = {2 + k: int(rng.integers(2, 7)) for k in range(n - 2)}
        qs = {2 + k: float(rng.uniform(0.5, 1.0)) for k in range(n - 2)}
        net = build_net(2, n - 2, edges, caps=caps, qs=qs)
        if net.connected(0, 1):
            return net


# ---------------------------------------------------------------------------
# Random series-parallel flow graphs


def random_sp_flow_graph(
    rng: np.random.Generator, max_elements: int = 12
) -> tuple[Network, FlowGraph]:
    """Series-parallel flow graph between users 0 and 1, within budget.

    Grown from a single channel by splitting a channel in two (series) or
    attaching a fresh two-hop branch beside one (parallel); both moves
    keep the graph series-parallel and one-edge-per-pair.
    """
    channels: dict[tuple[int, int], int] = {(0, 1): int(rng.integers(1, 3))}
    orientation = {(0, 1): (0, 1)}
    next_node = 2

    def elements() -> int:
        return sum(channels.values()) + (next_node - 2)

    for _ in range(int(rng.integers(1, 7))):
        keys = sorted(channels)
        key = keys[int(rng.integers(len(keys)))]
        tail, head = orientation[key]
        w1, w2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        m = next_node
        grow = w1 + w2 + 1
        if rng.random() < 0.5:
            # series split: tail -> m -> head replaces the channel
            if elements() - channels[key] + grow > max_elements:
                continue
            del channels[key]
            del orientation[key]
        else:
            # parallel branch beside the channel
            if elements() + grow > max_elements:
                continue
        for (a, b, w) in ((tail, m, w1), (m, head, w2)):
            k = edge_key(a, b)
            channels[k] = w
            orientation[k] = (a, b)
        next_node += 1

    n_switches = next_node - 2
    edges = [(u, v, float(rng.uniform(0.2, 0.95))) for (u, v) in sorted(channels)]
    qs = {2 + k: float(rng.uniform(0.5, 0.95)) for k in range(n_switches)}
    net = build_net(2, n_switches, edges, capacity=99, qs=qs)

    fg = FlowGraph(0, 0, 1, dict(channels), dict(orientation))
    kids: dict[int, list[int]] = {}
    for (tail, head) in orientation.values():
        kids.setdefault(tail, []).append(head)

    def paths_from(node: int) -> list[tuple[int, ...]]:
        if node == 1:
            return [(1,)]
        out = []
        for nxt in sorted(kids.get(node, [])):
            out += [(node,) + rest for rest in paths_from(nxt)]
        return out

    fg.members = [make_path(net, nodes, 1) for nodes in paths_from(0)]
    fg.validate(net)
    return net, fg
