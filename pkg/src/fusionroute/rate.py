"""Analytic entanglement-rate model plus independent verification oracles.

Success semantics: every link of a channel is an independent Bernoulli
trial with the edge's single-link probability; a channel is up when at
least one of its links survives.  Every switch interior to a route fuses
all of its surviving incident links in one shot, succeeding with the
switch's swap probability.  A shared state materializes when the two
users are connected through up channels and up switches.

Three quantitative views of that experiment live here:

* closed forms and an exact series-parallel evaluation of flow graphs
  (``channel_rate`` / ``path_rate`` / ``flow_graph_rate``),
* exhaustive outcome enumeration (``exhaustive_rate``), the ground truth,
* seeded Monte Carlo sampling (``monte_carlo_rate``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .netgraph import Demand, Network, edge_key

# Absolute tolerance used for probability comparisons throughout.
PROB_TOL = 1e-12

# Switch long products to log space past this many factors.
_LOG_SPACE_FACTORS = 64

EdgeKey = tuple[int, int]


def _prod(factors: Sequence[float]) -> float:
    if len(factors) <= _LOG_SPACE_FACTORS:
        return math.prod(factors)
    if any(f == 0.0 for f in factors):
        return 0.0
    return math.exp(math.fsum(math.log(f) for f in factors))


def channel_rate(p: float, width: int) -> float:
    """Probability that a width-``width`` channel yields at least one link.

    Equals 1 - (1 - p) ** width, evaluated in log space for accuracy at
    small p.  Monotone nondecreasing in both arguments.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"link probability {p} outside [0, 1]")
    if width < 1:
        raise ValueError("a channel needs at least one link")
    if p == 1.0:
        return 1.0
    return -math.expm1(width * math.log1p(-p))


@dataclass(frozen=True)
class WidthedPath:
    """Simple user-to-user path with a uniform channel width."""

    nodes: tuple[int, ...]
    width: int
    metric: float

    def __len__(self) -> int:
        return len(self.nodes) - 1  # hop count

    @property
    def interior(self) -> tuple[int, ...]:
        return self.nodes[1:-1]


def check_path(network: Network, nodes: Sequence[int], width: int = 1) -> None:
    """Validate a node sequence as a simple path with switch interiors."""
    if len(nodes) < 2:
        raise ValueError("a path needs at least two nodes")
    if width < 1:
        raise ValueError("path width must be at least 1")
    if len(set(nodes)) != len(nodes):
        raise ValueError(f"path repeats a node: {nodes}")
    for a, b in zip(nodes, nodes[1:]):
        if network.edge_between(a, b) is None:
            raise ValueError(f"nodes {a} and {b} are not adjacent")
    for v in nodes[1:-1]:
        if not network.is_switch(v):
            raise ValueError(f"interior node {v} is not a switch")


def path_rate(
    network: Network,
    path: WidthedPath | Sequence[int],
    width: int | None = None,
    *,
    widths: Sequence[int] | None = None,
) -> float:
    """Entanglement rate of a path: channel rates times interior swap probs.

    ``widths`` overrides the uniform width with one value per hop, for
    routes whose channels were widened unevenly.
    """
    if isinstance(path, WidthedPath):
        nodes = path.nodes
        w = path.width if width is None else width
    else:
        nodes = tuple(path)
        w = 1 if width is None else width
    check_path(network, nodes, w)
    hops = len(nodes) - 1
    if widths is None:
        widths = [w] * hops
    elif len(widths) != hops:
        raise ValueError("need one width per hop")
    chans = [
        channel_rate(network.edge_between(a, b).link_prob, wi)
        for (a, b), wi in zip(zip(nodes, nodes[1:]), widths)
    ]
    swaps = [network.node(v).swap_prob for v in nodes[1:-1]]
    return _prod(chans + swaps)


def classic_path_rate(
    network: Network, path: WidthedPath | Sequence[int], width: int | None = None
) -> float:
    """Expected end-to-end Bell pairs under lane-by-lane pair swapping.

    A width-w path is modeled as w independent width-1 chains, so the
    value is w times the product of raw link probabilities times the
    interior swap probabilities.  This is an expected count, not a
    probability, and may exceed 1.
    """
    if isinstance(path, WidthedPath):
        nodes = path.nodes
        w = path.width if width is None else width
    else:
        nodes = tuple(path)
        w = 1 if width is None else width
    check_path(network, nodes, w)
    links = [network.edge_between(a, b).link_prob for a, b in zip(nodes, nodes[1:])]
    swaps = [network.node(v).swap_prob for v in nodes[1:-1]]
    return w * _prod(links + swaps)


def make_path(network: Network, nodes: Sequence[int], width: int) -> WidthedPath:
    """Build a WidthedPath with its metric set to the analytic rate."""
    nodes = tuple(nodes)
    metric = path_rate(network, nodes, width)
    return WidthedPath(nodes, width, metric)


# ---------------------------------------------------------------------------
# Flow graphs


@dataclass
class FlowGraph:
    """Channels merged from one demand's routes, oriented source to dest.

    ``channels`` maps canonical edge keys to widths; ``orientation`` gives
    the traversal direction shared by every member path using the edge.
    """

    demand_id: int
    source: int
    dest: int
    channels: dict[EdgeKey, int] = field(default_factory=dict)
    orientation: dict[EdgeKey, tuple[int, int]] = field(default_factory=dict)
    members: list[WidthedPath] = field(default_factory=list)

    @classmethod
    def from_path(cls, demand: Demand, path: WidthedPath) -> "FlowGraph":
        fg = cls(demand.id, path.nodes[0], path.nodes[-1])
        for a, b in zip(path.nodes, path.nodes[1:]):
            key = edge_key(a, b)
            fg.channels[key] = path.width
            fg.orientation[key] = (a, b)
        fg.members.append(path)
        return fg

    def copy(self) -> "FlowGraph":
        return FlowGraph(
            self.demand_id,
            self.source,
            self.dest,
            dict(self.channels),
            dict(self.orientation),
            list(self.members),
        )

    def node_ids(self) -> set[int]:
        out: set[int] = set()
        for (u, v) in self.channels:
            out.add(u)
            out.add(v)
        return out

    def interior_switches(self, network: Network) -> list[int]:
        return sorted(v for v in self.node_ids() if network.is_switch(v))

    def children(self) -> dict[int, list[int]]:
        kids: dict[int, list[int]] = {v: [] for v in self.node_ids()}
        for (tail, head) in self.orientation.values():
            kids[tail].append(head)
        for v in kids:
            kids[v].sort()
        return kids

    def topological_order(self) -> list[int] | None:
        """Nodes in orientation order, or None when the orientation cycles."""
        kids = self.children()
        indeg = {v: 0 for v in kids}
        for heads in kids.values():
            for h in heads:
                indeg[h] += 1
        ready = sorted(v for v, d in indeg.items() if d == 0)
        order = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for h in kids[v]:
                indeg[h] -= 1
                if indeg[h] == 0:
                    ready.append(h)
            ready.sort()
        return order if len(order) == len(kids) else None

    def validate(self, network: Network) -> None:
        if not self.channels:
            raise ValueError(f"flow graph for demand {self.demand_id} has no channels")
        nodes = self.node_ids()
        if self.source not in nodes or self.dest not in nodes:
            raise ValueError("flow graph does not touch both demand endpoints")
        for key, w in self.channels.items():
            if w < 1:
                raise ValueError(f"channel {key} has width {w}")
            if network.edge_between(*key) is None:
                raise ValueError(f"channel {key} is not a network edge")
            if key not in self.orientation:
                raise ValueError(f"channel {key} has no orientation")
            if edge_key(*self.orientation[key]) != key:
                raise ValueError(f"orientation of {key} names other nodes")
        # undirected connectivity over the channel set
        seen = {self.source}
        stack = [self.source]
        adj: dict[int, set[int]] = {v: set() for v in nodes}
        for (u, v) in self.channels:
            adj[u].add(v)
            adj[v].add(u)
        while stack:
            cur = stack.pop()
            for nbr in adj[cur]:
                if nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
        if seen != nodes:
            raise ValueError("flow graph channels are not connected")
        if self.topological_order() is None:
            raise ValueError("flow graph orientation contains a cycle")
        covered: set[EdgeKey] = set()
        for m in self.members:
            check_path(network, m.nodes, m.width)
            if m.nodes[0] != self.source or m.nodes[-1] != self.dest:
                raise ValueError("member path does not run source to dest")
            for a, b in zip(m.nodes, m.nodes[1:]):
                covered.add(edge_key(a, b))
        if covered != set(self.channels):
            raise ValueError("channel set and member paths disagree")


def _merge_arc(arcs: dict[tuple[int, int], float], key: tuple[int, int], p: float) -> None:
    if key in arcs:
        arcs[key] = 1.0 - (1.0 - arcs[key]) * (1.0 - p)
    else:
        arcs[key] = p


def _sp_value(
    arcs: dict[tuple[int, int], float],
    swap_of: Callable[[int], float],
    source: int,
    dest: int,
) -> float | None:
    """Collapse a two-terminal oriented graph by series-parallel steps.

    Series steps fold an interior node's swap probability in exactly once;
    parallel steps combine same-endpoint arcs as independent alternatives.
    Returns the end-to-end probability, or None when the graph is not
    series-parallel reducible.
    """
    arcs = dict(arcs)
    while True:
        if len(arcs) == 1 and (source, dest) in arcs:
            return arcs[(source, dest)]
        into: dict[int, list[tuple[int, int]]] = {}
        outof: dict[int, list[tuple[int, int]]] = {}
        for (a, b) in arcs:
            outof.setdefault(a, []).append((a, b))
            into.setdefault(b, []).append((a, b))
        progressed = False
        interior = sorted(set(into) & set(outof) - {source, dest})
        for x in interior:
            if len(into[x]) == 1 and len(outof[x]) == 1:
                (a, _) = into[x][0]
                (_, b) = outof[x][0]
                p = arcs.pop((a, x)) * swap_of(x) * arcs.pop((x, b))
                _merge_arc(arcs, (a, b), p)
                progressed = True
                break
        if not progressed:
            return None


def is_series_parallel(fg: FlowGraph) -> bool:
    """Whether the flow graph collapses under series-parallel reduction."""
    arcs = {arc: 0.5 for arc in fg.orientation.values()}
    return _sp_value(arcs, lambda _v: 1.0, fg.source, fg.dest) is not None


def flow_graph_rate(network: Network, fg: FlowGraph) -> float:
    """Analytic entanglement rate of a flow graph.

    Exact (matches ``exhaustive_rate``) whenever the oriented channel set
    is series-parallel, which covers everything the router constructs.
    Otherwise falls back to the recursive child-product expansion, which
    treats shared downstream segments as independent.
    """
    fg.validate(network)
    arcs: dict[tuple[int, int], float] = {}
    for key, w in fg.channels.items():
        p = network.edge_between(*key).link_prob
        arcs[fg.orientation[key]] = channel_rate(p, w)
    swap_of = lambda v: network.node(v).swap_prob
    value = _sp_value(arcs, swap_of, fg.source, fg.dest)
    if value is not None:
        return value
    return _recursive_rate(fg, arcs, swap_of)


def _recursive_rate(
    fg: FlowGraph,
    arcs: Mapping[tuple[int, int], float],
    swap_of: Callable[[int], float],
) -> float:
    """Child-product recursion over the oriented flow graph."""
    kids = fg.children()
    limit = len(kids) + 1
    memo: dict[int, float] = {}

    def rec(a: int, depth: int) -> float:
        if depth > limit:
            raise ValueError("recursion depth exceeds node count")
        if a == fg.dest:
            return 1.0
        if a in memo:
            return memo[a]
        miss = 1.0
        for c in kids[a]:
            swap = swap_of(c) if c != fg.dest else 1.0
            miss *= 1.0 - arcs[(a, c)] * swap * rec(c, depth + 1)
        memo[a] = 1.0 - miss
        return memo[a]

    return rec(fg.source, 0)


# ---------------------------------------------------------------------------
# Oracles


@dataclass(frozen=True)
class OutcomeSample:
    """One draw of the physical process over a flow graph."""

    link_counts: dict[EdgeKey, int]   # surviving links per channel
    fusion_up: dict[int, bool]        # per interior switch


def sample_outcome(network: Network, fg: FlowGraph, rng: np.random.Generator) -> OutcomeSample:
    counts = {}
    for key in sorted(fg.channels):
        p = network.edge_between(*key).link_prob
        counts[key] = int(rng.binomial(fg.channels[key], p))
    fusion = {}
    for v in fg.interior_switches(network):
        fusion[v] = bool(rng.random() < network.node(v).swap_prob)
    return OutcomeSample(counts, fusion)


def _element_count(network: Network, fg: FlowGraph) -> int:
    return sum(fg.channels.values()) + len(fg.interior_switches(network))


def _outcome_connected(
    fg: FlowGraph,
    chan_keys: Sequence[EdgeKey],
    chan_up: Sequence[bool],
    switch_up: Mapping[int, bool],
) -> bool:
    """Whether source and dest join through up channels and up switches."""
    alive = lambda v: v == fg.source or v == fg.dest or switch_up.get(v, False)
    adj: dict[int, list[int]] = {}
    for key, up in zip(chan_keys, chan_up):
        if not up:
            continue
        u, v = key
        if alive(u) and alive(v):
            adj.setdefault(u, []).append(v)
            adj.setdefault(v, []).append(u)
    seen = {fg.source}
    stack = [fg.source]
    while stack:
        cur = stack.pop()
        if cur == fg.dest:
            return True
        for nbr in adj.get(cur, ()):
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return fg.source == fg.dest


def exhaustive_rate(network: Network, fg: FlowGraph, *, max_elements: int = 24) -> float:
    """Exact success probability by enumerating every element outcome.

    Probabilistic elements are the individual links (channel width many
    per channel) and the interior switch fusions.  Channel outcomes are
    grouped by survivor count, with the group probabilities accumulated
    from explicit binomial sums rather than the closed form, so this
    stays an independent check on the analytic path.
    """
    fg.validate(network)
    m = _element_count(network, fg)
    if m > max_elements:
        raise ValueError(
            f"{m} probabilistic elements exceed the enumeration bound "
            f"{max_elements}; use monte_carlo_rate instead"
        )
    chan_keys = sorted(fg.channels)
    up_p = []
    down_p = []
    for key in chan_keys:
        p = network.edge_between(*key).link_prob
        w = fg.channels[key]
        up = 0.0
        for k in range(1, w + 1):
            up += math.comb(w, k) * p**k * (1.0 - p) ** (w - k)
        up_p.append(up)
        down_p.append((1.0 - p) ** w)
    switches = fg.interior_switches(network)
    q = [network.node(v).swap_prob for v in switches]

    nc, ns = len(chan_keys), len(switches)
    total = 0.0
    for mask in range(1 << (nc + ns)):
        prob = 1.0
        chan_up = []
        for i in range(nc):
            if mask >> i & 1:
                prob *= up_p[i]
                chan_up.append(True)
            else:
                prob *= down_p[i]
                chan_up.append(False)
        switch_up = {}
        for j in range(ns):
            if mask >> (nc + j) & 1:
                prob *= q[j]
                switch_up[switches[j]] = True
            else:
                prob *= 1.0 - q[j]
                switch_up[switches[j]] = False
        if prob == 0.0:
            continue
        if _outcome_connected(fg, chan_keys, chan_up, switch_up):
            total += prob
    return total


def monte_carlo_rate(
    network: Network, fg: FlowGraph, trials: int, seed: int
) -> tuple[float, float]:
    """Sampled success rate of the physical process and its standard error.

    Success criterion matches ``exhaustive_rate``.  Deterministic per seed;
    trials are vectorized and reduced over distinct outcome patterns.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    fg.validate(network)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    chan_keys = sorted(fg.channels)
    switches = fg.interior_switches(network)

    cols = []
    for key in chan_keys:
        p = network.edge_between(*key).link_prob
        counts = rng.binomial(fg.channels[key], p, size=trials)
        cols.append(counts >= 1)
    for v in switches:
        cols.append(rng.random(trials) < network.node(v).swap_prob)
    if not cols:
        raise ValueError("flow graph has no probabilistic elements")
    patterns = np.column_stack(cols)
    nc = len(chan_keys)
    width = patterns.shape[1]
    if width <= 63:
        # pack each trial's outcome into one integer before deduplication
        powers = (np.uint64(1) << np.arange(width, dtype=np.uint64))
        ids, counts = np.unique(patterns.astype(np.uint64) @ powers, return_counts=True)
        uniq = [[(int(i) >> b) & 1 == 1 for b in range(width)] for i in ids]
    else:
        uniq, counts = np.unique(patterns, axis=0, return_counts=True)
    hits = 0
    for row, count in zip(uniq, counts):
        chan_up = [bool(b) for b in row[:nc]]
        switch_up = {v: bool(b) for v, b in zip(switches, row[nc:])}
        if _outcome_connected(fg, chan_keys, chan_up, switch_up):
            hits += int(count)
    estimate = hits / trials
    stderr = math.sqrt(estimate * (1.0 - estimate) / trials)
    return estimate, stderr
