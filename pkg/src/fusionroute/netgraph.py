"""Topology data model, random network generators, and serialization.

A network is a simple undirected graph of quantum users and switches.
Switches hold a bounded number of communication qubits and perform fusion
swaps with a per-switch success probability; users are memory-unconstrained
endpoints.  Each edge models a fiber span with a single-link success
probability p = exp(-alpha * length); parallel links on an edge are
represented downstream by channel widths, never by parallel edges.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_GENERATE_ATTEMPTS = 20
USER_ATTACH_COUNT = 3
WS_REWIRE_PROB = 0.1
POWERLAW_EXPONENT = 2.5
# Waxman decay length as a fraction of the area diagonal.
WAXMAN_DECAY_FRACTION = 0.2


class NodeKind(enum.Enum):
    USER = "user"
    SWITCH = "switch"


class GeneratorKind(enum.Enum):
    WAXMAN = "waxman"
    WATTS_STROGATZ = "watts-strogatz"
    POWER_LAW = "power-law"


def edge_key(u: int, v: int) -> tuple[int, int]:
    """Canonical unordered key for the edge between nodes u and v."""
    return (u, v) if u < v else (v, u)


def link_success_prob(length: float, alpha: float) -> float:
    """Single-link success probability exp(-alpha * length)."""
    if length < 0:
        raise ValueError(f"negative link length {length}")
    if alpha < 0:
        raise ValueError(f"negative attenuation constant {alpha}")
    return math.exp(-alpha * length)


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    x: float
    y: float
    capacity: int = 0        # qubit count, switches only
    swap_prob: float = 1.0   # fusion success probability, switches only

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError(f"node {self.id}: negative capacity")
        if not 0.0 <= self.swap_prob <= 1.0:
            raise ValueError(f"node {self.id}: swap_prob {self.swap_prob} outside [0, 1]")


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    length: float
    link_prob: float

    def __post_init__(self):
        if self.u == self.v:
            raise ValueError(f"self-loop at node {self.u}")
        if self.u > self.v:
            # store endpoints in canonical order
            u, v = self.v, self.u
            object.__setattr__(self, "u", u)
            object.__setattr__(self, "v", v)
        if self.length < 0:
            raise ValueError(f"edge ({self.u},{self.v}): negative length")
        if not 0.0 <= self.link_prob <= 1.0:
            raise ValueError(
                f"edge ({self.u},{self.v}): link probability {self.link_prob} outside [0, 1]"
            )

    @property
    def key(self) -> tuple[int, int]:
        return (self.u, self.v)


@dataclass(frozen=True)
class Demand:
    """One quantum state to be shared between a user pair."""

    id: int
    source: int
    dest: int

    def __post_init__(self):
        if self.source == self.dest:
            raise ValueError(f"demand {self.id}: source equals dest")


class Network:
    """Immutable undirected graph with a per-node adjacency index."""

    def __init__(self, nodes: Sequence[Node], edges: Sequence[Edge]):
        self.nodes: list[Node] = list(nodes)
        self.edges: list[Edge] = list(edges)
        for i, node in enumerate(self.nodes):
            if node.id != i:
                raise ValueError(f"node ids must be dense 0..n-1, found {node.id} at index {i}")
        self._adj: dict[int, dict[int, int]] = {n.id: {} for n in self.nodes}
        for idx, e in enumerate(self.edges):
            if e.u not in self._adj or e.v not in self._adj:
                raise ValueError(f"edge ({e.u},{e.v}) references unknown node")
            if e.v in self._adj[e.u]:
                raise ValueError(f"duplicate edge between {e.u} and {e.v}")
            self._adj[e.u][e.v] = idx
            self._adj[e.v][e.u] = idx

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Network)
            and self.nodes == other.nodes
            and self.edges == other.edges
        )

    def __repr__(self) -> str:
        nu = len(self.user_ids())
        return f"Network({nu} users, {len(self.nodes) - nu} switches, {len(self.edges)} edges)"

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def is_user(self, node_id: int) -> bool:
        return self.nodes[node_id].kind is NodeKind.USER

    def is_switch(self, node_id: int) -> bool:
        return self.nodes[node_id].kind is NodeKind.SWITCH

    def user_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind is NodeKind.USER]

    def switch_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind is NodeKind.SWITCH]

    def neighbors(self, node_id: int) -> list[int]:
        return sorted(self._adj[node_id])

    def edge_between(self, u: int, v: int) -> Edge | None:
        idx = self._adj[u].get(v)
        return self.edges[idx] if idx is not None else None

    def degree(self, node_id: int) -> int:
        return len(self._adj[node_id])

    def mean_switch_degree(self) -> float:
        switches = self.switch_ids()
        if not switches:
            return 0.0
        return sum(self.degree(v) for v in switches) / len(switches)

    def max_switch_capacity(self) -> int:
        return max((n.capacity for n in self.nodes if n.kind is NodeKind.SWITCH), default=0)

    def capacities(self) -> dict[int, int]:
        return {n.id: n.capacity for n in self.nodes if n.kind is NodeKind.SWITCH}

    def connected(self, u: int, v: int) -> bool:
        if u == v:
            return True
        seen = {u}
        stack = [u]
        while stack:
            cur = stack.pop()
            for nbr in self._adj[cur]:
                if nbr == v:
                    return True
                if nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
        return False

    def validate(self, strict: bool = True) -> None:
        """Check structural invariants.

        With ``strict`` the generation-contract rules are enforced as well:
        no user-user edges and link probabilities in (0, 1].  Hand-built
        in-memory test graphs may skip strict mode to override either rule.
        """
        for e in self.edges:
            if strict and self.is_user(e.u) and self.is_user(e.v):
                raise ValueError(f"edge ({e.u},{e.v}) connects two users")
            if strict and not 0.0 < e.link_prob <= 1.0:
                raise ValueError(
                    f"edge ({e.u},{e.v}): link probability {e.link_prob} outside (0, 1]"
                )


@dataclass(frozen=True)
class GenParams:
    """Random-network generation parameters."""

    generator: GeneratorKind = GeneratorKind.WAXMAN
    n_switches: int = 100
    n_users: int = 10
    n_demands: int = 20
    area_side: float = 10_000.0  # km
    avg_degree: float = 10.0
    capacity: int = 10
    swap_prob: float = 0.9
    alpha: float = 1e-4  # attenuation per km
    seed: int = 0

    def validate(self) -> None:
        if self.n_switches <= 0:
            raise ValueError("n_switches must be positive")
        if self.n_users < 2:
            raise ValueError("need at least two users")
        if self.n_demands <= 0:
            raise ValueError("n_demands must be positive")
        if self.n_demands > self.n_users * (self.n_users - 1):
            raise ValueError("more demands than distinct ordered user pairs")
        if self.area_side <= 0:
            raise ValueError("area_side must be positive")
        if self.avg_degree <= 0:
            raise ValueError("avg_degree must be positive")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if not 0.0 <= self.swap_prob <= 1.0:
            raise ValueError("swap_prob outside [0, 1]")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative 64-bit integer")


def _rng_for(seed: int, attempt: int) -> np.random.Generator:
    # PCG64 seeded through SeedSequence: portable, identical streams on
    # every platform for a fixed (seed, attempt).
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(attempt,))))


def max_edge_length(area_side: float, n_nodes: int) -> float:
    """Length cap applied to Waxman edge candidates.

    The cap shrinks with node count so denser deployments use shorter
    spans; the constant is calibrated so a 110-node default network allows
    spans up to roughly half the area side.
    """
    return 5.0 * area_side / math.sqrt(max(n_nodes, 1))


def _euclid(a: np.ndarray, b: np.ndarray) -> float:
    return float(math.hypot(a[0] - b[0], a[1] - b[1]))


def _waxman_pairs(
    sw_pos: np.ndarray, side: float, n_nodes: int, target_edges: int, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """Pick switch-switch pairs with Waxman-shaped probabilities.

    One uniform draw per candidate pair; the acceptance scale is then set by
    order statistics so the edge count lands exactly on target (the limit of
    tuning the Waxman beta by bisection against the degree target).
    """
    ns = len(sw_pos)
    cap = max_edge_length(side, n_nodes)
    decay = WAXMAN_DECAY_FRACTION * side * math.sqrt(2.0)
    cand: list[tuple[int, int]] = []
    weights: list[float] = []
    for i in range(ns):
        for j in range(i + 1, ns):
            d = _euclid(sw_pos[i], sw_pos[j])
            if d <= cap:
                cand.append((i, j))
                weights.append(math.exp(-d / decay))
    if not cand:
        return []
    draws = rng.random(len(cand))
    if len(cand) <= target_edges:
        return cand
    thresholds = draws / np.asarray(weights)
    order = np.argsort(thresholds, kind="stable")
    return [cand[k] for k in sorted(order[:target_edges].tolist())]


def _watts_strogatz_pairs(
    sw_pos: np.ndarray, target_degree: float, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """Ring lattice over switches ordered by angle, with random rewiring."""
    ns = len(sw_pos)
    k = max(2, 2 * int(round(target_degree / 2.0)))
    k = min(k, ns - 1 if (ns - 1) % 2 == 0 else ns - 2) if ns > 2 else 1
    center = sw_pos.mean(axis=0)
    angles = np.arctan2(sw_pos[:, 1] - center[1], sw_pos[:, 0] - center[0])
    ring = sorted(range(ns), key=lambda i: (angles[i], i))
    edges: set[tuple[int, int]] = set()
    for pos in range(ns):
        for j in range(1, k // 2 + 1):
            edges.add(edge_key(ring[pos], ring[(pos + j) % ns]))
    ordered = sorted(edges)
    result: set[tuple[int, int]] = set(ordered)
    for (u, v) in ordered:
        if rng.random() < WS_REWIRE_PROB:
            for _ in range(10):
                w = int(rng.integers(ns))
                new = edge_key(u, w) if w != u else None
                if new is not None and new not in result:
                    result.discard((u, v))
                    result.add(new)
                    break
    return sorted(result)


def _power_law_pairs(
    ns: int, target_edges: int, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """Scale-free pairs: Pareto node weights, product-weighted selection."""
    shape = POWERLAW_EXPONENT - 1.0
    weights = (1.0 - rng.random(ns)) ** (-1.0 / shape)
    cand = [(i, j) for i in range(ns) for j in range(i + 1, ns)]
    if not cand:
        return []
    draws = rng.random(len(cand))
    if len(cand) <= target_edges:
        return cand
    score = np.asarray([weights[i] * weights[j] for (i, j) in cand])
    thresholds = draws / score
    order = np.argsort(thresholds, kind="stable")
    return [cand[k] for k in sorted(order[:target_edges].tolist())]


def _build_once(params: GenParams, rng: np.random.Generator) -> tuple[Network, list[Demand]]:
    nu, ns = params.n_users, params.n_switches
    n_nodes = nu + ns
    sw_pos = rng.uniform(0.0, params.area_side, size=(ns, 2))
    user_pos = rng.uniform(0.0, params.area_side, size=(nu, 2))

    attach = min(USER_ATTACH_COUNT, ns)
    target_ss = int(round((params.avg_degree * ns - attach * nu) / 2.0))
    target_ss = max(target_ss, ns - 1)

    if params.generator is GeneratorKind.WAXMAN:
        pairs = _waxman_pairs(sw_pos, params.area_side, n_nodes, target_ss, rng)
    elif params.generator is GeneratorKind.WATTS_STROGATZ:
        pairs = _watts_strogatz_pairs(sw_pos, params.avg_degree - attach * nu / ns, rng)
    else:
        pairs = _power_law_pairs(ns, target_ss, rng)

    nodes = [
        Node(i, NodeKind.USER, float(user_pos[i][0]), float(user_pos[i][1]))
        for i in range(nu)
    ] + [
        Node(
            nu + i,
            NodeKind.SWITCH,
            float(sw_pos[i][0]),
            float(sw_pos[i][1]),
            capacity=params.capacity,
            swap_prob=params.swap_prob,
        )
        for i in range(ns)
    ]

    edge_keys: set[tuple[int, int]] = set()
    for (i, j) in pairs:
        edge_keys.add(edge_key(nu + i, nu + j))
    for u in range(nu):
        dists = sorted(
            range(ns), key=lambda i: (_euclid(user_pos[u], sw_pos[i]), i)
        )
        for i in dists[:attach]:
            edge_keys.add(edge_key(u, nu + i))

    edges = []
    for (a, b) in sorted(edge_keys):
        pa = np.array([nodes[a].x, nodes[a].y])
        pb = np.array([nodes[b].x, nodes[b].y])
        length = _euclid(pa, pb)
        edges.append(Edge(a, b, length, link_success_prob(length, params.alpha)))

    network = Network(nodes, edges)
    network.validate(strict=True)

    # Ordered user pairs sampled without replacement, then folded to
    # unordered endpoints; repeats of a pair are distinct demands.
    n_pairs = nu * (nu - 1)
    picks = rng.choice(n_pairs, size=params.n_demands, replace=False)
    demands = []
    for did, k in enumerate(int(x) for x in picks):
        a = k // (nu - 1)
        r = k % (nu - 1)
        b = r if r < a else r + 1
        demands.append(Demand(did, min(a, b), max(a, b)))
    return network, demands


def generate(params: GenParams) -> tuple[Network, list[Demand]]:
    """Generate a random network and demand list, deterministic per seed.

    Retries with derived seeds when a demand pair lands disconnected;
    exceeding the retry bound is an error.
    """
    params.validate()
    for attempt in range(MAX_GENERATE_ATTEMPTS):
        rng = _rng_for(params.seed, attempt)
        network, demands = _build_once(params, rng)
        if all(network.connected(d.source, d.dest) for d in demands):
            return network, demands
    raise ValueError(
        f"no connected network for all demands after {MAX_GENERATE_ATTEMPTS} attempts"
    )


# ---------------------------------------------------------------------------
# Serialization

_FORMAT_NAME = "fusionroute-network"


def save_network(network: Network, demands: Sequence[Demand] = ()) -> bytes:
    """Serialize a network (and optional demand list) to a JSON document."""
    doc: dict = {
        "format": _FORMAT_NAME,
        "version": 1,
        "nodes": [],
        "edges": [],
        "demands": [{"id": d.id, "s": d.source, "d": d.dest} for d in demands],
    }
    for n in network.nodes:
        rec: dict = {"id": n.id, "kind": n.kind.value, "x": n.x, "y": n.y}
        if n.kind is NodeKind.SWITCH:
            rec["capacity"] = n.capacity
            rec["q"] = n.swap_prob
        doc["nodes"].append(rec)
    for e in network.edges:
        doc["edges"].append({"u": e.u, "v": e.v, "length": e.length, "p": e.link_prob})
    return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode()


def _parse_doc(data: bytes | str) -> dict:
    if isinstance(data, bytes):
        data = data.decode()
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed network document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _FORMAT_NAME:
        raise ValueError("not a network document (missing format marker)")
    return doc


def load_network(data: bytes | str) -> Network:
    """Parse and validate a network document."""
    doc = _parse_doc(data)
    nodes = []
    try:
        for rec in doc["nodes"]:
            kind = NodeKind(rec["kind"])
            nodes.append(
                Node(
                    int(rec["id"]),
                    kind,
                    float(rec["x"]),
                    float(rec["y"]),
                    capacity=int(rec.get("capacity", 0)),
                    swap_prob=float(rec.get("q", 1.0)),
                )
            )
        edges = [
            Edge(int(r["u"]), int(r["v"]), float(r["length"]), float(r["p"]))
            for r in doc["edges"]
        ]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed network document: {exc}") from exc
    network = Network(nodes, edges)
    network.validate(strict=True)
    return network


def load_demands(data: bytes | str, network: Network) -> list[Demand]:
    """Parse the demand list of a document and check endpoints."""
    doc = _parse_doc(data)
    demands = []
    for rec in doc.get("demands", []):
        d = Demand(int(rec["id"]), int(rec["s"]), int(rec["d"]))
        for end in (d.source, d.dest):
            if end >= len(network.nodes) or not network.is_user(end):
                raise ValueError(f"demand {d.id}: endpoint {end} is not a user")
        demands.append(d)
    return demands


def to_dot(network: Network) -> str:
    """Graphviz rendering of the topology."""
    lines = [
        "graph topology {",
        "  layout=neato;",
        "  node [fontsize=9];",
    ]
    scale = 10.0 / max(network.nodes[-1].x, 1.0) if network.nodes else 1.0
    for n in network.nodes:
        shape = "doublecircle" if n.kind is NodeKind.USER else "circle"
        label = f"u{n.id}" if n.kind is NodeKind.USER else f"s{n.id}"
        lines.append(
            f'  n{n.id} [shape={shape}, label="{label}", '
            f'pos="{n.x * scale:.3f},{n.y * scale:.3f}!"];'
        )
    for e in network.edges:
        lines.append(f'  n{e.u} -- n{e.v} [label="{e.link_prob:.3f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
