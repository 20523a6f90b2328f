"""Four-stage routing pipeline for fusion-capable networks.

Stage 1 finds the rate-maximal width-w path for one demand (a Dijkstra
variant maximizing a multiplicative metric).  Stage 2 wraps it in a
deviation search to collect the top-h paths per width and demand.  Stage 3
commits candidates greedily against a live qubit ledger, merging paths of
the same demand into flow graphs.  Stage 4 spends leftover qubits widening
committed channels wherever that buys the largest rate increase.

Tie-breaking everywhere is lexicographic on (metric descending, hop count
ascending, node sequence ascending, demand id ascending) so identical
inputs produce identical plans.
"""

from __future__ import annotations

import heapq
import json
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .netgraph import Demand, Network, edge_key
from .rate import (
    FlowGraph,
    WidthedPath,
    channel_rate,
    flow_graph_rate,
    is_series_parallel,
    make_path,
)

DEFAULT_PATHS_PER_WIDTH = 5

EdgeKey = tuple[int, int]


class LedgerError(RuntimeError):
    """A qubit accounting invariant was violated."""


@dataclass
class QubitLedger:
    """Remaining free qubits per switch. Users carry no entry."""

    remaining: dict[int, int]

    @classmethod
    def from_network(cls, network: Network) -> "QubitLedger":
        return cls(dict(network.capacities()))

    def available(self, node_id: int) -> int:
        return self.remaining.get(node_id, 0)

    def debit(self, node_id: int, amount: int) -> None:
        left = self.remaining[node_id] - amount
        if left < 0:
            raise LedgerError(f"switch {node_id} driven to {left} qubits")
        self.remaining[node_id] = left

    def credit(self, node_id: int, amount: int) -> None:
        self.remaining[node_id] += amount

    def copy(self) -> "QubitLedger":
        return QubitLedger(dict(self.remaining))


# ---------------------------------------------------------------------------
# Stage 1: best path for a fixed width


def _search(
    network: Network,
    source: int,
    dest: int,
    width: int,
    caps: Mapping[int, int],
    banned_nodes: frozenset[int] = frozenset(),
    banned_edges: frozenset[EdgeKey] = frozenset(),
) -> tuple[tuple[int, ...], float] | None:
    """Max-metric Dijkstra from ``source`` to ``dest`` at a fixed width.

    The metric of a partial path multiplies each hop's channel rate and,
    when expanding from an intermediate switch, that switch's swap
    probability, so the finished metric equals the analytic path rate.
    A switch may join the path only with at least 2*width free qubits
    (one width per incident channel).  Users are never intermediate.
    """
    if source == dest:
        return None
    # best[v] holds the winning (-metric, hops, node sequence) tuple
    best: dict[int, tuple[float, int, tuple[int, ...]]] = {}
    start = (-1.0, 0, (source,))
    best[source] = start
    heap = [start]
    while heap:
        entry = heapq.heappop(heap)
        negmet, hops, seq = entry
        node = seq[-1]
        if best.get(node) != entry:
            continue  # superseded
        if node == dest:
            return seq, -negmet
        if node != source and not network.is_switch(node):
            continue  # paths never pass through a user
        expand = 1.0
        if node != source and network.is_switch(node):
            expand = network.node(node).swap_prob
        for nbr in network.neighbors(node):
            if nbr in banned_nodes or nbr in seq:
                continue
            key = edge_key(node, nbr)
            if key in banned_edges:
                continue
            if nbr != dest:
                if not network.is_switch(nbr):
                    continue
                if caps.get(nbr, 0) < 2 * width:
                    continue
            edge = network.edge_between(node, nbr)
            met = -negmet * expand * channel_rate(edge.link_prob, width)
            cand = (-met, hops + 1, seq + (nbr,))
            if nbr not in best or cand < best[nbr]:
                best[nbr] = cand
                heapq.heappush(heap, cand)
    return None


def alg1_best_path(
    network: Network, demand: Demand, width: int, caps: Mapping[int, int]
) -> WidthedPath | None:
    """Largest-rate simple path between the demand's users, or None."""
    if width < 1:
        raise ValueError("width must be at least 1")
    found = _search(network, demand.source, demand.dest, width, caps)
    if found is None:
        return None
    nodes, _ = found
    return make_path(network, nodes, width)


# ---------------------------------------------------------------------------
# Stage 2: top-h paths per width and demand


@dataclass
class CandidateSet:
    """Per width and demand, up to h feasible paths by descending metric.

    Feasibility is checked against full switch capacities; the ledger is
    only debited later, at commit time, so candidates may reuse resources
    freely among themselves.
    """

    h: int
    max_width: int
    demands: list[Demand]
    per_width: dict[int, dict[int, list[WidthedPath]]]

    def paths(self, width: int, demand_id: int) -> list[WidthedPath]:
        return self.per_width.get(width, {}).get(demand_id, [])


def _path_sort_key(path: WidthedPath) -> tuple:
    return (-path.metric, len(path.nodes), path.nodes)


def _yen(
    network: Network,
    source: int,
    dest: int,
    width: int,
    caps: Mapping[int, int],
    h: int,
) -> list[WidthedPath]:
    """Deviation search for the h largest-rate paths at one width.

    Accepted paths spawn spur searches at every prefix node with the spur
    edge and the inherited removed-edge set excluded; the candidate queue
    is deduplicated by node sequence and pruned so queued plus accepted
    never exceeds h.
    """
    first = _search(network, source, dest, width, caps)
    if first is None:
        return []
    queue: list[tuple[frozenset[EdgeKey], WidthedPath]] = [
        (frozenset(), make_path(network, first[0], width))
    ]
    known: set[tuple[int, ...]] = {first[0]}
    accepted: list[WidthedPath] = []
    while queue and len(accepted) < h:
        idx = min(range(len(queue)), key=lambda i: _path_sort_key(queue[i][1]))
        removed, path = queue.pop(idx)
        accepted.append(path)
        nodes = path.nodes
        for i in range(len(nodes) - 1):
            spur_edge = edge_key(nodes[i], nodes[i + 1])
            sub = _search(
                network,
                nodes[i],
                dest,
                width,
                caps,
                banned_nodes=frozenset(nodes[:i]),
                banned_edges=removed | {spur_edge},
            )
            if sub is None:
                continue
            merged = nodes[:i] + sub[0]
            if merged in known:
                continue
            known.add(merged)
            queue.append((removed | {spur_edge}, make_path(network, merged, width)))
            while len(queue) + len(accepted) > h:
                worst = max(range(len(queue)), key=lambda i: _path_sort_key(queue[i][1]))
                queue.pop(worst)
    return accepted


def alg2_candidates(
    network: Network,
    demands: Sequence[Demand],
    h: int = DEFAULT_PATHS_PER_WIDTH,
    *,
    max_width: int | None = None,
) -> CandidateSet:
    """Collect candidate paths for every width from the widest down to 1."""
    if h < 1:
        raise ValueError("h must be at least 1")
    caps = network.capacities()
    max_cap = network.max_switch_capacity()
    if max_width is None:
        max_width = max(max_cap, 1 if network.edges else 0)
    per_width: dict[int, dict[int, list[WidthedPath]]] = {}
    for width in range(max_width, 0, -1):
        by_demand: dict[int, list[WidthedPath]] = {}
        for demand in demands:
            if 2 * width > max_cap and network.edge_between(demand.source, demand.dest) is None:
                by_demand[demand.id] = []
                continue
            by_demand[demand.id] = _yen(
                network, demand.source, demand.dest, width, caps, h
            )
        per_width[width] = by_demand
    return CandidateSet(h, max_width, list(demands), per_width)


# ---------------------------------------------------------------------------
# Stage 3: greedy merge against the live ledger


@dataclass
class RoutePlan:
    """Committed flow graphs, the final ledger, and augmentation log."""

    demands: list[Demand]
    flow_graphs: dict[int, FlowGraph]
    ledger: QubitLedger
    augmentations: list[tuple[EdgeKey, int]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def demand_rate(self, network: Network, demand_id: int) -> float:
        fg = self.flow_graphs.get(demand_id)
        return flow_graph_rate(network, fg) if fg is not None else 0.0

    def total_rate(self, network: Network) -> float:
        return sum(self.demand_rate(network, d.id) for d in self.demands)

    def copy(self) -> "RoutePlan":
        return RoutePlan(
            list(self.demands),
            {k: fg.copy() for k, fg in self.flow_graphs.items()},
            self.ledger.copy(),
            list(self.augmentations),
            dict(self.timings),
        )

    def committed_widths(self, network: Network) -> dict[int, int]:
        """Per switch, total width over all committed (edge, demand) channels."""
        used: dict[int, int] = {v: 0 for v in network.switch_ids()}
        for fg in self.flow_graphs.values():
            for (u, v), w in fg.channels.items():
                for end in (u, v):
                    if network.is_switch(end):
                        used[end] += w
        return used

    def verify(self, network: Network) -> None:
        """Raise unless qubit conservation and ledger bounds hold."""
        used = self.committed_widths(network)
        caps = network.capacities()
        for v, cap in caps.items():
            left = self.ledger.available(v)
            if left < 0 or left > cap:
                raise LedgerError(f"switch {v}: {left} qubits outside [0, {cap}]")
            if cap - left != used[v]:
                raise LedgerError(
                    f"switch {v}: committed width {used[v]} != consumed {cap - left}"
                )
        for fg in self.flow_graphs.values():
            fg.validate(network)


def _audit(network: Network, plan: RoutePlan) -> None:
    plan.verify(network)


def _shared_span(
    fg: FlowGraph | None, nodes: tuple[int, ...]
) -> tuple[list[bool], bool] | None:
    """Classify hops as shared with the demand's flow graph.

    Returns (shared flags, all_shared) or None when sharing is unusable:
    a shared hop runs against the committed orientation, or the shared
    hops fail to form a contiguous prefix and/or suffix of the path.
    """
    hops = list(zip(nodes, nodes[1:]))
    if fg is None:
        return [False] * len(hops), False
    shared = []
    for (a, b) in hops:
        key = edge_key(a, b)
        if key in fg.channels:
            if fg.orientation[key] != (a, b):
                return None
            shared.append(True)
        else:
            shared.append(False)
    if all(shared):
        return shared, True
    first_new = shared.index(False)
    last_new = len(shared) - 1 - shared[::-1].index(False)
    if any(shared[first_new : last_new + 1]):
        return None  # shared hop strands inside the new middle section
    return shared, False


def _try_commit(
    network: Network,
    ledger: QubitLedger,
    flow_graphs: dict[int, FlowGraph],
    demand: Demand,
    path: WidthedPath,
) -> bool:
    """Attempt to merge one candidate path into its demand's flow graph.

    A hop is free when it is already a committed channel of the same
    demand (shared, same direction); otherwise it consumes ``width``
    qubits at each switch endpoint, checked hop by hop against the live
    ledger with full rollback on failure.  Merges that would break the
    series-parallel shape of the flow graph are rejected so the analytic
    rate stays exact.
    """
    fg = flow_graphs.get(demand.id)
    span = _shared_span(fg, path.nodes)
    if span is None:
        return False
    shared, all_shared = span

    if fg is None:
        trial = FlowGraph.from_path(demand, path)
    else:
        trial = fg.copy()
        for (a, b), is_shared in zip(zip(path.nodes, path.nodes[1:]), shared):
            if is_shared:
                continue
            key = edge_key(a, b)
            trial.channels[key] = path.width
            trial.orientation[key] = (a, b)
        trial.members.append(path)
    if not all_shared and fg is not None:
        if trial.topological_order() is None:
            return False
        if not is_series_parallel(trial):
            return False

    debited: list[tuple[int, int]] = []
    for (a, b), is_shared in zip(zip(path.nodes, path.nodes[1:]), shared):
        if is_shared:
            continue
        ok = True
        for end in (a, b):
            if not network.is_switch(end):
                continue
            if ledger.available(end) < path.width:
                ok = False
                break
            ledger.debit(end, path.width)
            debited.append((end, path.width))
        if not ok:
            for node, amount in debited:
                ledger.credit(node, amount)
            return False
    flow_graphs[demand.id] = trial
    return True


def alg3_merge(network: Network, candidates: CandidateSet) -> RoutePlan:
    """Commit candidates widest width first, best metric first."""
    ledger = QubitLedger.from_network(network)
    flow_graphs: dict[int, FlowGraph] = {}
    plan = RoutePlan(list(candidates.demands), flow_graphs, ledger)
    by_id = {d.id: d for d in candidates.demands}
    for width in range(candidates.max_width, 0, -1):
        batch = [
            (path, did)
            for did, paths in sorted(candidates.per_width.get(width, {}).items())
            for path in paths
        ]
        batch.sort(key=lambda item: (_path_sort_key(item[0]), item[1]))
        for path, did in batch:
            if _try_commit(network, ledger, flow_graphs, by_id[did], path):
                _audit(network, plan)
    return plan


# ---------------------------------------------------------------------------
# Stage 4: residual qubit assignment


def alg4_augment(network: Network, plan: RoutePlan) -> RoutePlan:
    """Spend leftover qubit pairs widening committed channels.

    For each committed edge with a free qubit at every switch endpoint,
    the width increment goes to the demand whose flow graph gains the
    most analytic rate; the loop stops per edge when no positive gain
    remains.  Total rate never decreases.
    """
    ledger = plan.ledger
    rates = {
        did: flow_graph_rate(network, fg) for did, fg in plan.flow_graphs.items()
    }
    edges = sorted({key for fg in plan.flow_graphs.values() for key in fg.channels})
    for key in edges:
        switch_ends = [v for v in key if network.is_switch(v)]
        if not switch_ends:
            continue  # user-user channel: no bounded endpoint to spend
        while all(ledger.available(v) >= 1 for v in switch_ends):
            best_gain = 0.0
            best_did = None
            best_rate = 0.0
            for did in sorted(plan.flow_graphs):
                fg = plan.flow_graphs[did]
                if key not in fg.channels:
                    continue
                trial = fg.copy()
                trial.channels[key] += 1
                new_rate = flow_graph_rate(network, trial)
                gain = new_rate - rates[did]
                if gain > best_gain:
                    best_gain = gain
                    best_did = did
                    best_rate = new_rate
            if best_did is None or best_gain <= 0.0:
                break
            plan.flow_graphs[best_did].channels[key] += 1
            rates[best_did] = best_rate
            for v in switch_ends:
                ledger.debit(v, 1)
            plan.augmentations.append((key, best_did))
            _audit(network, plan)
    return plan


def run_pipeline(
    network: Network,
    demands: Sequence[Demand],
    h: int = DEFAULT_PATHS_PER_WIDTH,
    *,
    augment: bool = True,
) -> RoutePlan:
    """Full pipeline: candidates, greedy merge, residual assignment."""
    t0 = time.perf_counter()
    candidates = alg2_candidates(network, demands, h)
    t1 = time.perf_counter()
    plan = alg3_merge(network, candidates)
    t2 = time.perf_counter()
    if augment:
        plan = alg4_augment(network, plan)
    t3 = time.perf_counter()
    plan.timings = {
        "alg1_ms": (t1 - t0) * 1e3,
        "alg3_ms": (t2 - t1) * 1e3,
        "alg4_ms": (t3 - t2) * 1e3,
    }
    return plan


# ---------------------------------------------------------------------------
# Plan serialization

_PLAN_FORMAT = "fusionroute-plan"


def plan_to_document(network: Network, plan: RoutePlan, mode: str = "nfusion") -> bytes:
    doc: dict = {"format": _PLAN_FORMAT, "version": 1, "mode": mode, "demands": []}
    for d in plan.demands:
        fg = plan.flow_graphs.get(d.id)
        rec: dict = {"id": d.id, "s": d.source, "d": d.dest, "channels": [], "members": []}
        if fg is not None:
            for key in sorted(fg.channels):
                tail, head = fg.orientation[key]
                rec["channels"].append(
                    {"u": key[0], "v": key[1], "width": fg.channels[key], "tail": tail}
                )
            for m in fg.members:
                rec["members"].append({"nodes": list(m.nodes), "width": m.width})
            rec["rate"] = flow_graph_rate(network, fg)
        else:
            rec["rate"] = 0.0
        doc["demands"].append(rec)
    doc["remaining"] = {str(k): v for k, v in sorted(plan.ledger.remaining.items())}
    doc["augmentations"] = [
        {"u": key[0], "v": key[1], "demand": did} for key, did in plan.augmentations
    ]
    return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode()


def plan_from_document(data: bytes | str, network: Network) -> RoutePlan:
    if isinstance(data, bytes):
        data = data.decode()
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed plan document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _PLAN_FORMAT:
        raise ValueError("not a plan document (missing format marker)")
    demands = []
    flow_graphs: dict[int, FlowGraph] = {}
    for rec in doc["demands"]:
        demand = Demand(int(rec["id"]), int(rec["s"]), int(rec["d"]))
        demands.append(demand)
        if not rec["channels"]:
            continue
        fg = FlowGraph(demand.id, demand.source, demand.dest)
        for ch in rec["channels"]:
            key = edge_key(int(ch["u"]), int(ch["v"]))
            tail = int(ch["tail"])
            head = key[1] if tail == key[0] else key[0]
            fg.channels[key] = int(ch["width"])
            fg.orientation[key] = (tail, head)
        for m in rec["members"]:
            fg.members.append(make_path(network, [int(x) for x in m["nodes"]], int(m["width"])))
        fg.validate(network)
        flow_graphs[demand.id] = fg
    remaining = {int(k): int(v) for k, v in doc.get("remaining", {}).items()}
    if not remaining:
        remaining = dict(network.capacities())
    plan = RoutePlan(demands, flow_graphs, QubitLedger(remaining))
    plan.augmentations = [
        (edge_key(int(a["u"]), int(a["v"])), int(a["demand"]))
        for a in doc.get("augmentations", [])
    ]
    return plan


_DOT_COLORS = [
    "crimson", "royalblue", "forestgreen", "darkorange", "purple",
    "teal", "deeppink", "saddlebrown", "olive", "navy",
]


def plan_to_dot(network: Network, plan: RoutePlan) -> str:
    """Topology overlay with per-demand route coloring."""
    lines = ["graph routes {", "  layout=neato;", "  node [fontsize=9];"]
    for n in network.nodes:
        shape = "doublecircle" if network.is_user(n.id) else "circle"
        lines.append(f'  n{n.id} [shape={shape}, label="{n.id}"];')
    committed: dict[EdgeKey, list[tuple[int, int]]] = {}
    for did in sorted(plan.flow_graphs):
        for key, w in plan.flow_graphs[did].channels.items():
            committed.setdefault(key, []).append((did, w))
    for e in network.edges:
        uses = committed.get(e.key)
        if not uses:
            lines.append(f"  n{e.u} -- n{e.v} [color=gray80];")
            continue
        for did, w in uses:
            color = _DOT_COLORS[did % len(_DOT_COLORS)]
            lines.append(
                f'  n{e.u} -- n{e.v} [color={color}, penwidth={w}, label="d{did}:w{w}"];'
            )
    lines.append("}")
    return "\n".join(lines) + "\n"
