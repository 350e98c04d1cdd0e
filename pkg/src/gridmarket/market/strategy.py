"""How agents price their orders.

A strategy turns the interval's price signals and offered quantities into
orders.  The default draws prices uniformly between the FIT and the local
price signal; in islanded intervals the asking floor is lifted toward the
signal, so sellers ask more when supply is short.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import StrategyParams
from ..dispatch.model import ISLANDED
from .orders import ASK, BID, Order


def agent_id(node) -> str:
    return f"n{int(node):03d}"


@dataclass
class StrategyContext:
    """Inputs to one interval's order generation.

    ``sell`` / ``buy`` map node id to offered kW.  ``ask_ref`` is the price
    sellers anchor their asks on and ``bid_cap`` the DLMP bounding each
    buyer's bid (both node id -> $/MWh).
    """

    interval: int
    mode: str
    fit: float
    sell: dict
    buy: dict
    ask_ref: dict
    bid_cap: dict
    zone_of: dict = field(default_factory=dict)


class BiddingStrategy:
    """Asks are drawn before bids: in islanded intervals the bid caps come
    from a dispatch that already contains the asks."""

    def asks(self, ctx: StrategyContext, rng: np.random.Generator) -> list:
        raise NotImplementedError

    def bids(self, ctx: StrategyContext, rng: np.random.Generator) -> list:
        raise NotImplementedError

    def orders(self, ctx: StrategyContext, rng: np.random.Generator) -> list:
        return self.asks(ctx, rng) + self.bids(ctx, rng)


class UniformDLMPStrategy(BiddingStrategy):
    """Asks uniform in [floor, signal], bids uniform in [floor, DLMP].

    The floor is the FIT, lifted by ``islanded_shift`` of the way toward the
    (capped) signal when islanded.  A floor above the buyer's DLMP collapses
    the bid range onto the DLMP.
    """

    def __init__(self, params: StrategyParams = StrategyParams()):
        self.params = params

    def ask_bounds(self, ctx, node):
        top = max(ctx.ask_ref[node], ctx.fit)
        if ctx.mode == ISLANDED:
            top = max(min(top, self.params.price_cap), ctx.fit)
            return ctx.fit + self.params.islanded_shift * (top - ctx.fit), top
        return ctx.fit, top

    def asks(self, ctx, rng):
        out = []
        for node in sorted(ctx.sell):
            q = ctx.sell[node]
            if q <= 0:
                continue
            lo, hi = self.ask_bounds(ctx, node)
            out.append(Order(agent_id(node), ASK, node, ctx.zone_of.get(node, 0), float(rng.uniform(lo, hi)),
                             float(q), ctx.interval))
        return out

    def bids(self, ctx, rng):
        out = []
        for node in sorted(ctx.buy):
            q = ctx.buy[node] * self.params.flexible_fraction
            if q <= 0:
                continue
            hi = ctx.bid_cap[node]
            floor = self.ask_bounds(ctx, node)[0] if node in ctx.ask_ref else ctx.fit
            lo = min(floor, hi)
            out.append(Order(agent_id(node), BID, node, ctx.zone_of.get(node, 0), float(rng.uniform(lo, hi)),
                             float(q), ctx.interval))
        return out
