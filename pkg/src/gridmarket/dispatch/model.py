from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ValidationError
from ..netmodel import Network

GRID_CONNECTED = "grid-connected"
ISLANDED = "islanded"


@dataclass(frozen=True)
class Unit:
    """A dispatchable injection as seen by one OPF solve (kW, kvar, $/MWh)."""

    name: str
    node: int
    p_min: float
    p_max: float
    cost: float
    q_min: float = 0.0
    q_max: float = 0.0
    kind: str = "utility-DG"


@dataclass(frozen=True)
class Offer:
    """Prosumer surplus admitted to the OPF at its ask (active power only)."""

    agent: str
    node: int
    price: float
    quantity: float


@dataclass
class DispatchProblem:
    """One interval of the dispatch.  Loads and injections in kW / kvar.

    ``fixed_injection`` is must-take active power (netted PV, approved P2P
    sales); ``firm_load`` is the part of each node's load that may not be
    shed (approved P2P purchases).
    """

    network: Network
    load_p: np.ndarray
    load_q: np.ndarray
    units: list
    voll: float
    mode: str = GRID_CONNECTED
    offers: list = field(default_factory=list)
    fixed_injection: Optional[np.ndarray] = None
    firm_load: Optional[np.ndarray] = None
    root_voltage: float = 1.0
    interval_hours: float = 1.0
    label: str = ""

    def __post_init__(self):
        n = self.network.n_nodes
        self.load_p = np.asarray(self.load_p, dtype=float).copy()
        self.load_q = np.asarray(self.load_q, dtype=float).copy()
        self.fixed_injection = (np.zeros(n) if self.fixed_injection is None
                                else np.asarray(self.fixed_injection, dtype=float).copy())
        self.firm_load = np.zeros(n) if self.firm_load is None else np.asarray(self.firm_load, dtype=float).copy()
        self.units = list(self.units)
        self.offers = list(self.offers)

    def validate(self):
        problems = []
        n = self.network.n_nodes
        for name in ("load_p", "load_q", "fixed_injection", "firm_load"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                problems.append(f"{name} has shape {arr.shape}, expected ({n},)")
            elif not np.all(np.isfinite(arr)):
                problems.append(f"{name} has non-finite entries")
        if problems:
            raise ValidationError("; ".join(problems), problems)
        if np.any(self.load_p < 0):
            problems.append("negative active load")
        if np.any(self.firm_load < -1e-12) or np.any(self.firm_load > self.load_p + 1e-9):
            problems.append("firm load must lie in [0, load]")
        for nd in self.network.nodes:
            if nd.v_min > nd.v_max:
                problems.append(f"node {nd.id}: v_min > v_max")
        if self.mode not in (GRID_CONNECTED, ISLANDED):
            problems.append(f"unknown mode {self.mode!r}")
        for u in self.units:
            if u.node not in self.network.index:
                problems.append(f"unit {u.name} at unknown node {u.node}")
            if u.p_min > u.p_max or u.q_min > u.q_max:
                problems.append(f"unit {u.name}: contradictory bounds")
            if not np.isfinite(u.cost):
                problems.append(f"unit {u.name}: non-finite cost")
            if self.mode == ISLANDED and u.kind == "grid-root" and (u.p_max > 0 or u.p_min < 0):
                problems.append(f"unit {u.name}: upstream exchange must be 0 when islanded")
            if u.cost >= self.voll and u.p_max > 0:
                problems.append(f"unit {u.name}: cost {u.cost} not below VOLL {self.voll}")
        for o in self.offers:
            if o.node not in self.network.index:
                problems.append(f"offer {o.agent} at unknown node {o.node}")
            if o.quantity < 0:
                problems.append(f"offer {o.agent}: negative quantity")
            if not (0 <= o.price < self.voll):
                problems.append(f"offer {o.agent}: price {o.price} outside [0, VOLL)")
        if problems:
            raise ValidationError("contradictory dispatch problem: " + "; ".join(problems), problems)

    @property
    def sheddable(self):
        return np.maximum(self.load_p - self.firm_load, 0.0)


def units_for(network: Network, mode: str, lmp: float, export_price: float = 0.0) -> list:
    """Dispatchable units of ``network`` for one interval.

    The upstream tie becomes an import unit priced at the LMP and, when the
    tie allows reverse flow, an export unit valued at ``export_price``.
    Both vanish in islanded mode.  PV units are not returned: prosumer
    output enters either as fixed injection or as an :class:`Offer`.
    """
    out = []
    for g in network.generators:
        if g.kind == "grid-root":
            if mode == ISLANDED:
                continue
            if g.p_max > 0:
                out.append(Unit(g.name, g.node, 0.0, g.p_max, float(lmp), g.q_min, g.q_max, "grid-root"))
            if g.p_min < 0:
                out.append(Unit(g.name + ":export", g.node, g.p_min, 0.0, float(export_price), 0.0, 0.0,
                                "grid-root"))
        elif g.kind == "utility-DG":
            out.append(Unit(g.name, g.node, g.p_min, g.p_max, g.cost, g.q_min, g.q_max, g.kind))
    return out


@dataclass
class DispatchResult:
    """Primal/dual solution of one OPF solve.

    Node arrays follow network node order, line arrays network line order.
    Powers in kW/kvar; ``v`` and ``sq_current`` in per-unit (squared);
    prices in $/MWh.  ``pi``/``mu`` are the raw active/reactive balance
    multipliers; ``dlmp`` additionally folds in the multiplier of the
    shedding cap, which moves with the load (see :func:`extract_dlmp`).
    ``raw_gap`` is the cone gap of the solver's point before the current
    polish (``polished`` tells whether the polish was applied).
    """

    problem: DispatchProblem
    status: str
    objective_rate: float
    gen_p: dict
    gen_q: dict
    offer_p: dict
    shed_p: np.ndarray
    shed_q: np.ndarray
    v: np.ndarray
    flow_p: np.ndarray
    flow_q: np.ndarray
    sq_current: np.ndarray
    pi: np.ndarray
    mu: np.ndarray
    dlmp: np.ndarray
    iterations: int = 0
    solver: str = "socp"
    primal: Optional[np.ndarray] = field(default=None, repr=False)
    duals: Optional[np.ndarray] = field(default=None, repr=False)
    polished: bool = False
    raw_gap: float = float("nan")

    @property
    def objective(self):
        """Cost over the interval in $."""
        return self.objective_rate * self.problem.interval_hours

    @property
    def optimal(self):
        return self.status == "optimal"

    @property
    def total_shed(self):
        return float(np.sum(self.shed_p))

    @property
    def losses(self):
        """Active losses in kW."""
        net = self.problem.network
        return float(np.sum(net.r * self.sq_current)) * net.base_mva * 1000.0

    def node_gen(self):
        """Active generation per node (units + offers), kW."""
        net = self.problem.network
        out = np.zeros(net.n_nodes)
        for u in self.problem.units:
            out[net.index[u.node]] += self.gen_p[u.name]
        for o in self.problem.offers:
            out[net.index[o.node]] += self.offer_p[o.agent]
        return out

    def balance_residual(self):
        """Max nodal active/reactive balance residual in p.u."""
        net = self.problem.network
        base = net.base_mva * 1000.0
        p_in = np.zeros(net.n_nodes)
        q_in = np.zeros(net.n_nodes)
        loss_p = net.r * self.sq_current
        loss_q = net.x * self.sq_current
        np.add.at(p_in, net.line_dst, self.flow_p / base - loss_p)
        np.add.at(p_in, net.line_src, -self.flow_p / base)
        np.add.at(q_in, net.line_dst, self.flow_q / base - loss_q)
        np.add.at(q_in, net.line_src, -self.flow_q / base)
        gq = np.zeros(net.n_nodes)
        for u in self.problem.units:
            gq[net.index[u.node]] += self.gen_q[u.name]
        pr = p_in + (self.node_gen() + self.problem.fixed_injection + self.shed_p - self.problem.load_p) / base
        qr = q_in + (gq + self.shed_q - self.problem.load_q) / base
        return float(max(np.max(np.abs(pr)), np.max(np.abs(qr))))
