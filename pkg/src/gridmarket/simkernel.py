"""Time-stepped scenario simulation.

Every interval runs the same pipeline: apply outage events, net prosumer
PV against local load, dispatch for the price signal, and (with P2P on)
collect orders, clear the auction, vet the matches, re-dispatch with the
approved trades held fixed and settle.  Intervals share no state, and each
one draws its randomness from its own generator seeded with
``(seed, interval)``, so results do not depend on execution order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import UPSTREAM, OutageEvent, ScenarioConfig
from .dispatch import GRID_CONNECTED, ISLANDED, DispatchProblem, Offer, check_exactness, solve, units_for
from .errors import GridMarketError, InvariantBreach, ValidationError
from .market import (APPROVED, BLOCKED, StrategyContext, UniformDLMPStrategy, budget_balance, grid_totals,
                     payoffs, run_mrda, settle)
from .netmodel import Network, Profiles
from .vetting import compute_sensitivities, vet_matches

log = logging.getLogger(__name__)

# Shedding below this many kW in total counts as none.
SHED_TOL = 1e-3


def resilience_index(shed: float, total: float) -> float:
    """Percentage of demand served: ``(1 - shed / total) * 100``."""
    if not total > 0:
        raise ValueError("resilience index needs a positive total load")
    return (1.0 - shed / total) * 100.0


@dataclass(frozen=True)
class EventState:
    mode: str
    dead_nodes: frozenset = frozenset()
    dead_lines: tuple = ()


def _line_of(network: Network, element: str) -> int:
    name = element.split(":", 1)[1] if element.startswith("line:") else None
    if name is None:
        raise ValidationError(f"unknown event element {element!r}")
    for k, ln in enumerate(network.lines):
        if ln.name == name or f"{ln.dst}-{ln.src}" == name:
            return k
    raise ValidationError(f"unknown event element {element!r}: no line {name}")


def check_events(config: ScenarioConfig, network: Network):
    for ev in config.events:
        if ev.element != UPSTREAM:
            _line_of(network, ev.element)


def apply_events(config: ScenarioConfig, interval: int, network: Network) -> EventState:
    """Operating state at ``interval``.

    An upstream outage islands the feeder.  A line outage de-energises
    everything downstream of the line.  Overlapping windows simply combine.
    """
    mode = GRID_CONNECTED
    dead, lines = set(), []
    for ev in config.events:
        if ev.element == UPSTREAM:
            if ev.active(interval):
                mode = ISLANDED
            continue
        k = _line_of(network, ev.element)
        if ev.active(interval):
            lines.append(network.lines[k].name)
            dead.update(network.subtree(network.lines[k].dst))
    return EventState(mode, frozenset(dead), tuple(sorted(set(lines))))


@dataclass
class IntervalRecord:
    """Results of one interval.  Powers in kW, prices in $/MWh, cash in $.

    ``dlmp`` and ``unit_p`` come from the pricing dispatch, ``cone_gap`` is
    the worst over all dispatches of the interval, the rest describes the
    final (settled) dispatch.
    """

    t: int
    mode: str
    total_load: float
    served: float
    shed: float
    ri: float
    dlmp: np.ndarray
    atp: float
    n_matches: int
    n_blocked: int
    traded: float
    surplus: float
    deficit: float
    fit_credit: float
    dlmp_debit: float
    p2p_cash: float
    budget: float
    welfare: float
    generation: float
    losses: float
    cone_gap: float
    energy_residual: float
    unit_p: dict = field(default_factory=dict)  # unit outputs of the pricing dispatch, kW
    outcome: Optional[object] = field(default=None, repr=False, compare=False)
    vetting: list = field(default_factory=list, repr=False, compare=False)


@dataclass
class _Interval:
    load_p: np.ndarray
    load_q: np.ndarray
    net_p: np.ndarray
    net_q: np.ndarray
    selfc: np.ndarray
    surplus: np.ndarray
    forced_shed: float


def _interval_inputs(network: Network, profiles: Profiles, t: int, state: EventState) -> _Interval:
    base_p = np.array([n.load_p for n in network.nodes])
    base_q = np.array([n.load_q for n in network.nodes])
    mult = profiles.load_mult[t]
    load_p, load_q = base_p * mult, base_q * mult
    pv = np.zeros(network.n_nodes)
    for g in network.generators:
        if g.kind == "PV-prosumer" and g.node in profiles.pv_frac:
            pv[network.index[g.node]] += g.p_max * profiles.pv_frac[g.node][t]
    forced = 0.0
    if state.dead_nodes:
        dead = np.array([nid in state.dead_nodes for nid in network.node_ids])
        forced = float(load_p[dead].sum())
        pv[dead] = 0.0
        load_p = np.where(dead, 0.0, load_p)
        load_q = np.where(dead, 0.0, load_q)
    selfc = np.minimum(pv, load_p)
    net_p = load_p - selfc
    # constant power factor for the part of the load left to the grid
    ratio = np.divide(net_p, load_p, out=np.zeros_like(load_p), where=load_p > 0)
    return _Interval(load_p, load_q, net_p, load_q * ratio, selfc, pv - selfc, forced)


def _units(network, mode, lmp, config, state):
    us = units_for(network, mode, lmp, config.export_price)
    return [u for u in us if u.node not in state.dead_nodes]


def _clean_shed(kw):
    return 0.0 if kw < SHED_TOL else kw


def _bidders(network, values, min_kw=SHED_TOL):
    return {nid: float(values[k]) for k, nid in enumerate(network.node_ids)
            if network.nodes[k].agent_role != "none" and values[k] > min_kw}


def run_interval(network: Network, profiles: Profiles, config: ScenarioConfig, t: int,
                 strategy=None) -> IntervalRecord:
    state = apply_events(config, t, network)
    mode = state.mode
    iv = _interval_inputs(network, profiles, t, state)
    units = _units(network, mode, profiles.lmp[t], config, state)
    h = config.interval_hours
    rng = np.random.default_rng([config.seed, t])
    strategy = strategy or UniformDLMPStrategy(config.strategy)
    ids = network.node_ids

    def problem(label, **kw):
        kw.setdefault("load_p", iv.net_p)
        kw.setdefault("load_q", iv.net_q)
        return DispatchProblem(network, units=units, voll=config.voll, mode=mode,
                               root_voltage=config.root_voltage, interval_hours=h, label=f"t={t} {label}", **kw)

    solves = []

    def dispatch(pb):
        try:
            res = solve(pb, config.solver)
        except GridMarketError as exc:
            raise type(exc)(f"interval {t}: {exc}") from exc
        solves.append(res)
        return res

    outcome, report = None, []
    surplus_total = float(iv.surplus.sum())
    sellers = _bidders(network, iv.surplus)
    if mode == GRID_CONNECTED:
        # prosumer surplus flows to the grid either way; the market only decides who pays whom
        signal = dispatch(problem("signal", fixed_injection=iv.surplus))
        deficit = _clean_shed(signal.total_shed)
        final = signal
        if config.p2p_enabled:
            dl = dict(zip(ids, signal.dlmp))
            ctx = StrategyContext(t, mode, config.fit, sellers, _bidders(network, iv.net_p), dl, dl,
                                  network.zones)
            outcome, report, firm = _market(network, config, strategy, ctx, rng, signal, t, h)
            if outcome.matches:
                final = dispatch(problem("settled", fixed_injection=iv.surplus,
                                         firm_load=np.minimum(firm, iv.net_p)))
    else:
        # islanded: surplus is only usable through the market
        pre = dispatch(problem("pre-signal"))
        deficit = _clean_shed(pre.total_shed)
        signal = final = pre
        if config.p2p_enabled and sellers:
            dl_pre = dict(zip(ids, pre.dlmp))
            ctx = StrategyContext(t, mode, config.fit, sellers, {}, dl_pre, {}, network.zones)
            asks = strategy.asks(ctx, rng)
            offers = [Offer(o.agent, o.node, o.price, o.quantity) for o in asks]
            signal = dispatch(problem("signal", offers=offers))
            ctx.buy = _bidders(network, pre.shed_p)
            ctx.bid_cap = dict(zip(ids, signal.dlmp))
            bids = strategy.bids(ctx, rng)
            outcome, report, firm = _market(network, config, strategy, ctx, rng, signal, t, h, asks + bids)
            sold = np.zeros(network.n_nodes)
            for m in outcome.approved():
                sold[network.index[m.seller_node]] += m.quantity
            rest = iv.surplus - sold
            # unmatched surplus goes to the grid at the FIT and becomes dispatchable
            leftover = [Offer(f"fit:{ids[k]}", ids[k], config.fit, float(rest[k]))
                        for k in range(network.n_nodes) if rest[k] > SHED_TOL]
            final = dispatch(problem("settled", offers=leftover, fixed_injection=sold,
                                     firm_load=np.minimum(firm, iv.net_p)))

    total = float(iv.load_p.sum()) + iv.forced_shed
    shed = _clean_shed(final.total_shed + iv.forced_shed)
    ri = resilience_index(shed, total) if total > 0 else 100.0

    if outcome is not None:
        credit, debit = grid_totals(outcome)
        _, _, tw = payoffs(outcome)
        approved = outcome.approved()
        cash = sum(m.quantity * m.price for m in approved) * h / 1000.0
        rec_out = (outcome.atp, len(approved), sum(1 for m in outcome.matches if m.status == BLOCKED),
                   outcome.traded, credit, debit, cash, budget_balance(approved, h), tw)
    else:
        rec_out = (float("nan"), 0, 0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    atp, n_m, n_b, traded, credit, debit, cash, bb, tw = rec_out

    # worst relaxation gap over every dispatch of the interval
    gap = max(check_exactness(r) for r in solves) if final.solver == "socp" else float("nan")
    gen = float(final.node_gen().sum())
    base = network.base_mva * 1000.0
    served = total - shed
    # supply (units, offers, fixed injections, self-consumption) - losses - load served by the feeder
    resid = (gen + float(final.problem.fixed_injection.sum()) + float(iv.selfc.sum()) - final.losses
             - (float(iv.load_p.sum()) - final.total_shed)) / base
    return IntervalRecord(
        t=t, mode=mode, total_load=total, served=served, shed=shed, ri=ri, dlmp=signal.dlmp.copy(), atp=atp,
        n_matches=n_m, n_blocked=n_b, traded=traded, surplus=surplus_total, deficit=deficit,
        fit_credit=credit, dlmp_debit=debit, p2p_cash=cash, budget=bb, welfare=tw, generation=gen,
        losses=final.losses, cone_gap=gap,
        energy_residual=float(resid), unit_p={k: float(v) for k, v in signal.gen_p.items()}, outcome=outcome,
        vetting=report)


def _market(network, config, strategy, ctx, rng, signal, t, h, orders=None):
    if orders is None:
        orders = strategy.orders(ctx, rng)
    dl = dict(zip(network.node_ids, signal.dlmp))
    outcome = run_mrda(orders, network, ctx.bid_cap or dl, interval=t, interval_hours=h)
    sens = compute_sensitivities(network, signal, t)
    outcome.matches, report = vet_matches(outcome.matches, sens, t, config.vetting_margin)
    settle(outcome, config.fit, dl)
    firm = np.zeros(network.n_nodes)
    for m in outcome.matches:
        if m.status == APPROVED:
            firm[network.index[m.buyer_node]] += m.quantity
    return outcome, report, firm


def run_simulation(network: Network, profiles: Profiles, config: ScenarioConfig, strategy=None,
                   intervals=None) -> list:
    """Simulate ``config.horizon`` intervals (or the given subset)."""
    config.validate()
    check_events(config, network)
    if profiles.n_intervals < config.horizon:
        raise ValidationError(f"profiles cover {profiles.n_intervals} intervals, horizon is {config.horizon}")
    ts = range(config.horizon) if intervals is None else intervals
    return [run_interval(network, profiles, config, t, strategy) for t in ts]


@dataclass(frozen=True)
class ComparisonRow:
    t: int
    mode: str
    ri_with: float
    ri_without: float
    atp_with: float
    dlmp_with_mean: float
    dlmp_without_mean: float

    @property
    def ri_delta(self):
        return self.ri_with - self.ri_without


def compare_runs(with_p2p: list, without_p2p: list, tol: float = 1e-9) -> list:
    """Pair two runs interval by interval; a P2P run must never serve less."""
    if len(with_p2p) != len(without_p2p):
        raise ValueError(f"horizons differ: {len(with_p2p)} vs {len(without_p2p)} intervals")
    rows = []
    for a, b in zip(with_p2p, without_p2p):
        if a.t != b.t:
            raise ValueError(f"interval mismatch: {a.t} vs {b.t}")
        if a.ri < b.ri - tol:
            raise InvariantBreach(f"interval {a.t}: RI with P2P {a.ri} below RI without {b.ri}")
        rows.append(ComparisonRow(a.t, a.mode, a.ri, b.ri, a.atp, float(np.mean(a.dlmp)), float(np.mean(b.dlmp))))
    return rows
