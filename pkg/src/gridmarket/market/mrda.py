"""Multi-round double auction with the average price mechanism.

Each round partitions the still-open orders into pools (per node, then per
zone, then one network-wide pool).  Inside a pool the threshold ``gamma`` is
the mean of every submitted price, only asks strictly below and bids
strictly above it may trade, and qualified orders are paired greedily at
the midpoint of ask and bid.  Whatever is left over, qualified or not,
moves on to the next round with its remaining quantity.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..errors import ValidationError
from .kernels import greedy_match
from .orders import (ASK, BID, NETWORK, NODAL, ZONAL, AuctionOutcome, Match, average_price,
                     check_dlmp_caps, qualify, sort_orders)

# Remainders at or below this many kW are treated as fully filled.
QTY_EPS = 1e-9


def match_round(asks, bids, round_name=NETWORK, use_numba=None):
    """Greedy pairing of sorted, already-qualified books.

    Returns ``(matches, residual)`` where ``residual`` maps agent id to the
    quantity left in the book after this pairing.
    """
    asks, bids = sort_orders(asks, bids)
    residual = {o.agent: o.quantity for o in asks}
    residual.update({o.agent: o.quantity for o in bids})
    if not asks or not bids:
        return [], residual
    ap = np.array([o.price for o in asks])
    aq = np.array([o.quantity for o in asks])
    bp = np.array([o.price for o in bids])
    bq = np.array([o.quantity for o in bids])
    ia, ib, qty = greedy_match(ap, aq, bp, bq, use_numba)
    matches = []
    for a, b, q in zip(ia, ib, qty):
        s, d = asks[a], bids[b]
        matches.append(Match(s.agent, d.agent, float(q), (s.price + d.price) / 2.0, round_name,
                             s.price, d.price, s.node, d.node))
        residual[s.agent] -= float(q)
        residual[d.agent] -= float(q)
    for k, v in residual.items():
        if v <= QTY_EPS:
            residual[k] = 0.0
    return matches, residual


def _pool_key(order, round_name):
    if round_name == NODAL:
        return order.node
    if round_name == ZONAL:
        return order.zone
    return 0


def run_mrda(orders, network=None, dlmp=None, interval=0, interval_hours=0.25, use_numba=None,
             rounds=(NODAL, ZONAL, NETWORK)) -> AuctionOutcome:
    """Clear one interval's orders through the nodal, zonal and network rounds.

    ``dlmp`` (node id -> $/MWh), when given, is enforced as the cap on bids.
    Pooling uses the node and zone carried by each order; ``network``, when
    given, is only used to reject orders at unknown nodes.
    """
    orders = list(orders)
    seen = set()
    for o in orders:
        if network is not None and o.node not in network.index:
            raise ValidationError(f"order {o.agent} at unknown node {o.node}")
        if o.agent in seen:
            raise ValueError(f"agent {o.agent} submitted more than one order")
        seen.add(o.agent)
    check_dlmp_caps([o for o in orders if o.side == BID], dlmp)

    open_orders = list(orders)
    matches, thresholds = [], []
    for rnd in rounds:
        pools = {}
        for o in open_orders:
            pools.setdefault(_pool_key(o, rnd), []).append(o)
        carried = []
        for key in sorted(pools):
            pool = pools[key]
            asks = [o for o in pool if o.side == ASK]
            bids = [o for o in pool if o.side == BID]
            if not asks or not bids:
                carried += pool
                continue
            gamma = average_price(asks, bids)
            thresholds.append((rnd, key, gamma))
            qa, qb = qualify(asks, bids, gamma)
            got, residual = match_round(qa, qb, rnd, use_numba)
            matches += got
            for o in pool:
                left = residual.get(o.agent, o.quantity)
                if left > 0:
                    carried.append(o if left == o.quantity else replace(o, quantity=left))
        open_orders = carried

    residual = {o.agent: 0.0 for o in orders}
    for o in open_orders:
        residual[o.agent] = o.quantity
    return AuctionOutcome(orders=orders, matches=matches, residual=residual, thresholds=thresholds,
                          interval=interval, interval_hours=interval_hours)
