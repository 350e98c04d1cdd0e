"""Grid fallback settlement and welfare accounting."""
from __future__ import annotations

from .orders import ASK, BLOCKED, AuctionOutcome, Settlement
from .mrda import QTY_EPS


def energy_cost(kw: float, price: float, hours: float) -> float:
    """$ for ``kw`` held for ``hours`` at ``price`` $/MWh."""
    return kw * hours * price / 1000.0


def settle(outcome: AuctionOutcome, fit: float, dlmp) -> AuctionOutcome:
    """Settle every unmatched quantity with the grid.

    Blocked matches count as unmatched.  Sellers are credited at the FIT,
    buyers are debited at their node's DLMP (``dlmp`` maps node id to
    $/MWh).  Updates ``outcome.residual`` and ``outcome.settlements`` in
    place and returns the outcome.
    """
    matched = {o.agent: 0.0 for o in outcome.orders}
    for m in outcome.matches:
        if m.status == BLOCKED:
            continue
        matched[m.seller] += m.quantity
        matched[m.buyer] += m.quantity
    h = outcome.interval_hours
    residual, flows = {}, []
    for o in outcome.orders:
        left = o.quantity - matched[o.agent]
        left = 0.0 if left <= QTY_EPS else left
        residual[o.agent] = left
        if left == 0.0:
            continue
        if o.side == ASK:
            flows.append(Settlement(o.agent, o.node, "fit-sale", left, fit, energy_cost(left, fit, h)))
        else:
            try:
                price = dlmp[o.node]
            except (KeyError, IndexError):
                raise KeyError(f"no DLMP for node {o.node} (residual demand of {o.agent})") from None
            flows.append(Settlement(o.agent, o.node, "dlmp-purchase", left, price, -energy_cost(left, price, h)))
    outcome.residual = residual
    outcome.settlements = flows
    return outcome


def payoffs(outcome: AuctionOutcome):
    """Per-agent surplus over surviving matches, in kW*$/MWh.

    Returns ``(sw, bw, tw)``: seller surplus per ask agent, buyer surplus per
    bid agent (0 for agents without a trade) and their total.
    """
    sw = {o.agent: 0.0 for o in outcome.orders if o.side == ASK}
    bw = {o.agent: 0.0 for o in outcome.orders if o.side != ASK}
    for m in outcome.approved():
        sw[m.seller] += m.seller_surplus
        bw[m.buyer] += m.buyer_surplus
    return sw, bw, sum(sw.values()) + sum(bw.values())


def grid_totals(outcome: AuctionOutcome):
    """($ FIT credits, $ DLMP debits) of the grid settlements, both >= 0."""
    credit = sum(s.amount for s in outcome.settlements if s.kind == "fit-sale")
    debit = -sum(s.amount for s in outcome.settlements if s.kind == "dlmp-purchase")
    return credit, debit
