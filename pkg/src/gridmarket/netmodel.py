"""Radial feeder data model.

Nodes carry loads and voltage bounds, lines carry per-unit impedances and
thermal limits, generators sit on nodes.  All containers are frozen; derived
tree structure (parents, depth, paths) is computed once per network and
cached on the instance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ValidationError

AGENT_ROLES = ("none", "prosumer", "consumer")
GEN_KINDS = ("utility-DG", "PV-prosumer", "grid-root")


@dataclass(frozen=True)
class Generator:
    """Dispatchable unit.  Powers in kW/kvar, cost in $/MWh.

    ``p_min`` may be negative for the upstream export tie.
    """

    name: str
    node: int
    p_max: float
    cost: float
    kind: str = "utility-DG"
    p_min: float = 0.0
    q_min: float = 0.0
    q_max: float = 0.0


@dataclass(frozen=True)
class Node:
    id: int
    load_p: float = 0.0
    load_q: float = 0.0
    v_min: float = 0.9
    v_max: float = 1.1
    agent_role: str = "none"


@dataclass(frozen=True)
class Line:
    """Branch from the ancestor side ``src`` to ``dst``.

    ``current_limit`` is the squared per-unit current cap; ``flow_limit``
    is the apparent power rating in kVA.
    """

    src: int
    dst: int
    r: float
    x: float
    flow_limit: float
    current_limit: float

    @property
    def name(self):
        return f"{self.src}-{self.dst}"


@dataclass(frozen=True)
class Network:
    nodes: tuple
    lines: tuple
    root: int
    base_kv: float = 12.66
    base_mva: float = 10.0
    generators: tuple = ()
    zones: Mapping[int, int] = field(default_factory=dict)
    name: str = "feeder"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "zones", dict(self.zones))

    # --- indexing -------------------------------------------------------
    @cached_property
    def node_ids(self) -> list:
        return [n.id for n in self.nodes]

    @cached_property
    def index(self) -> dict:
        return {nid: k for k, nid in enumerate(self.node_ids)}

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_lines(self):
        return len(self.lines)

    def node(self, nid) -> Node:
        return self.nodes[self.index[nid]]

    def zone_of(self, nid) -> int:
        return self.zones.get(nid, 0)

    @cached_property
    def line_index(self) -> dict:
        return {(ln.src, ln.dst): k for k, ln in enumerate(self.lines)}

    # --- tree structure (valid only after validate_radial passes) --------
    @cached_property
    def parent_line(self) -> np.ndarray:
        """For each node position, the index of the line feeding it (-1 at root)."""
        out = np.full(self.n_nodes, -1, dtype=np.int64)
        for k, ln in enumerate(self.lines):
            out[self.index[ln.dst]] = k
        return out

    @cached_property
    def parent(self) -> np.ndarray:
        """Parent node position per node position (-1 at root)."""
        out = np.full(self.n_nodes, -1, dtype=np.int64)
        for ln in self.lines:
            out[self.index[ln.dst]] = self.index[ln.src]
        return out

    @cached_property
    def line_src(self) -> np.ndarray:
        return np.array([self.index[ln.src] for ln in self.lines], dtype=np.int64)

    @cached_property
    def line_dst(self) -> np.ndarray:
        return np.array([self.index[ln.dst] for ln in self.lines], dtype=np.int64)

    @cached_property
    def children_lines(self) -> list:
        out = [[] for _ in self.nodes]
        for k, ln in enumerate(self.lines):
            out[self.index[ln.src]].append(k)
        return out

    @cached_property
    def bfs_order(self) -> np.ndarray:
        """Node positions in breadth-first order from the root."""
        order = [self.index[self.root]]
        head = 0
        while head < len(order):
            for k in self.children_lines[order[head]]:
                order.append(self.index[self.lines[k].dst])
            head += 1
        return np.array(order, dtype=np.int64)

    @cached_property
    def path_incidence(self) -> np.ndarray:
        """Boolean (lines x nodes) matrix: line k lies on the root path of node j."""
        m = np.zeros((self.n_lines, self.n_nodes), dtype=bool)
        for j in range(self.n_nodes):
            p = j
            while self.parent_line[p] >= 0:
                m[self.parent_line[p], j] = True
                p = self.parent[p]
        return m

    @property
    def r(self) -> np.ndarray:
        return np.array([ln.r for ln in self.lines])

    @property
    def x(self) -> np.ndarray:
        return np.array([ln.x for ln in self.lines])

    def subtree(self, nid) -> list:
        """Node ids of ``nid`` and all its descendants."""
        out = [nid]
        head = 0
        while head < len(out):
            for k in self.children_lines[self.index[out[head]]]:
                out.append(self.lines[k].dst)
            head += 1
        return out

    @property
    def total_load(self):
        return sum(n.load_p for n in self.nodes)

    def generators_at(self, nid) -> list:
        return [g for g in self.generators if g.node == nid]


@dataclass(frozen=True)
class Profiles:
    """Per-interval exogenous series.

    ``load_mult`` has shape (intervals, nodes) in network node order;
    ``pv_frac`` maps prosumer node id -> availability series in [0, 1].
    """

    load_mult: np.ndarray
    pv_frac: Mapping[int, np.ndarray]
    lmp: np.ndarray
    fit: float
    voll: float
    interval_minutes: float = 15.0

    @property
    def n_intervals(self):
        return self.load_mult.shape[0]

    @property
    def interval_hours(self):
        return self.interval_minutes / 60.0

    def hour_of(self, t):
        return t * self.interval_minutes / 60.0


# ---------------------------------------------------------------------------
# validation


def validate_radial(network: Network) -> list:
    """Return a list of topology violations; an empty list means the network
    is a spanning tree rooted at ``network.root``."""
    problems = []
    ids = [n.id for n in network.nodes]
    seen = set()
    for nid in ids:
        if nid in seen:
            problems.append(f"duplicate node id {nid}")
        seen.add(nid)
    if network.root not in seen:
        problems.append(f"root {network.root} is not a node")
        return problems

    parent_of = {}
    pairs, dupes = set(), set()
    for ln in network.lines:
        for end in (ln.src, ln.dst):
            if end not in seen:
                problems.append(f"line {ln.name} references unknown node {end}")
        if ln.src == ln.dst:
            problems.append(f"self loop at node {ln.src}")
            continue
        key = frozenset((ln.src, ln.dst))
        if key in pairs:
            problems.append(f"not a tree: duplicate line {ln.src}-{ln.dst}")
            dupes.add(key)
        pairs.add(key)
        if ln.dst == network.root:
            problems.append(f"line {ln.name} feeds the root")
        if ln.dst in parent_of:
            problems.append(f"node {ln.dst} has multiple parents ({parent_of[ln.dst]}, {ln.src})")
        else:
            parent_of[ln.dst] = ln.src
    if any("unknown node" in p for p in problems):
        return problems

    uf = {nid: nid for nid in seen}

    def find(a):
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = uf[a]
        return a

    for ln in network.lines:
        if ln.src == ln.dst:
            continue
        a, b = find(ln.src), find(ln.dst)
        if a != b:
            uf[a] = b
        elif frozenset((ln.src, ln.dst)) not in dupes:
            problems.append(f"cycle detected between nodes {ln.src} and {ln.dst}")
    comps = {find(nid) for nid in seen}
    if len(comps) > 1:
        reach = find(network.root)
        stray = sorted(nid for nid in seen if find(nid) != reach)
        problems.append(f"disconnected: nodes {stray} unreachable from root {network.root}")
    if not problems and len(network.lines) != len(ids) - 1:
        problems.append(f"not a tree: {len(network.lines)} lines for {len(ids)} nodes")
    return problems


def validate_network(network: Network) -> None:
    """Full validation: topology plus per-element invariants.  Raises
    :class:`ValidationError` listing every violation."""
    problems = validate_radial(network)
    for n in network.nodes:
        if not (0 < n.v_min < n.v_max):
            problems.append(f"node {n.id}: voltage bounds need 0 < v_min < v_max")
        if n.load_p < 0:
            problems.append(f"node {n.id}: negative load")
        if n.agent_role not in AGENT_ROLES:
            problems.append(f"node {n.id}: unknown agent role {n.agent_role!r}")
    for ln in network.lines:
        if ln.r < 0 or ln.x < 0 or (ln.r == 0 and ln.x == 0):
            problems.append(f"line {ln.name}: need r >= 0, x >= 0, not both zero")
        if ln.flow_limit <= 0 or ln.current_limit <= 0:
            problems.append(f"line {ln.name}: limits must be positive")
    ids = set(network.node_ids)
    for g in network.generators:
        if g.node not in ids:
            problems.append(f"generator {g.name} references unknown node {g.node}")
        if g.p_max < 0 or g.p_max < g.p_min:
            problems.append(f"generator {g.name}: bad active power bounds")
        if g.q_max < g.q_min:
            problems.append(f"generator {g.name}: bad reactive power bounds")
        if g.cost < 0:
            problems.append(f"generator {g.name}: negative cost")
        if g.kind not in GEN_KINDS:
            problems.append(f"generator {g.name}: unknown kind {g.kind!r}")
    for nid in network.zones:
        if nid not in ids:
            problems.append(f"zone map references unknown node {nid}")
    if problems:
        raise ValidationError(f"invalid network '{network.name}': " + "; ".join(problems), problems)


def validate_profiles(profiles: Profiles, network: Network) -> None:
    problems = []
    T = profiles.n_intervals
    if profiles.load_mult.shape != (T, network.n_nodes):
        problems.append(f"load multiplier shape {profiles.load_mult.shape} != ({T}, {network.n_nodes})")
    if np.any(profiles.load_mult < 0):
        problems.append("negative load multiplier")
    if profiles.lmp.shape != (T,):
        problems.append("LMP series length does not match interval count")
    for nid, s in profiles.pv_frac.items():
        if nid not in network.index:
            problems.append(f"PV series for unknown node {nid}")
        if s.shape != (T,):
            problems.append(f"PV series for node {nid} has wrong length")
        if np.any(s < 0) or np.any(s > 1):
            problems.append(f"PV fraction at node {nid} outside [0, 1]")
    if profiles.interval_minutes <= 0:
        problems.append("interval length must be positive")
    top = max([g.cost for g in network.generators] + [float(np.max(profiles.lmp, initial=0.0))])
    if not profiles.voll > top:
        problems.append(f"VOLL {profiles.voll} must exceed every generation cost and LMP (max {top})")
    if profiles.fit < 0:
        problems.append("negative FIT")
    if problems:
        raise ValidationError("invalid profiles: " + "; ".join(problems), problems)


def ancestor(network: Network, node: int) -> int:
    """Parent of ``node`` on its path to the root."""
    if node == network.root:
        raise ValueError(f"node {node} is the root and has no ancestor")
    if node not in network.index:
        raise KeyError(f"unknown node {node}")
    p = network.parent[network.index[node]]
    if p < 0:
        raise ValueError(f"node {node} has no parent (network not validated?)")
    return network.node_ids[p]


def with_loads(network: Network, load_p: Sequence[float], load_q: Optional[Sequence[float]] = None) -> Network:
    """Copy of ``network`` with replaced nodal loads (kW / kvar)."""
    if load_q is None:
        load_q = [n.load_q for n in network.nodes]
    nodes = [
        Node(n.id, float(p), float(q), n.v_min, n.v_max, n.agent_role)
        for n, p, q in zip(network.nodes, load_p, load_q)
    ]
    return Network(nodes, network.lines, network.root, network.base_kv, network.base_mva,
                   network.generators, network.zones, network.name)
