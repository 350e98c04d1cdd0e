"""Independent reference implementations used by the tests."""
from itertools import combinations_with_replacement

import numpy as np

from gridmarket.market import ASK, BID, Order, average_price, match_round, qualify

PRICE_GRID = (10.0, 20.0, 30.0, 40.0, 50.0)


def max_crossing_matching(asks, bids):
    """Largest number of disjoint (ask, bid) pairs with ask < bid, by brute force."""
    best = 0

    def extend(i, used, count):
        nonlocal best
        if count + (len(asks) - i) <= best:
            return
        if i == len(asks):
            best = max(best, count)
            return
        extend(i + 1, used, count)
        for j, b in enumerate(bids):
            if j not in used and asks[i] < b:
                extend(i + 1, used | {j}, count + 1)

    extend(0, frozenset(), 0)
    return best


def unit_instances(max_agents=6, grid=PRICE_GRID):
    """Every (ask prices, bid prices) multiset pair with at most ``max_agents`` agents."""
    for n in range(2, max_agents + 1):
        for k in range(1, n):
            for ap in combinations_with_replacement(grid, k):
                for bp in combinations_with_replacement(grid, n - k):
                    yield ap, bp


def greedy_vs_oracle(ap, bp, use_numba=None):
    """(greedy traded quantity, oracle maximum) on the gamma-qualified books."""
    asks = [Order(f"s{i}", ASK, 1, 0, p, 1.0) for i, p in enumerate(ap)]
    bids = [Order(f"b{i}", BID, 1, 0, p, 1.0) for i, p in enumerate(bp)]
    gamma = average_price(asks, bids)
    qa, qb = qualify(asks, bids, gamma)
    matches, _ = match_round(qa, qb, use_numba=use_numba)
    got = sum(m.quantity for m in matches)
    want = max_crossing_matching([o.price for o in qa], [o.price for o in qb])
    return got, want


def random_book(rng, n_asks, n_bids, nodes=(1, 2, 3, 4), zones=None, price_hi=100.0):
    zones = zones or {n: 1 + (n - 1) // 2 for n in nodes}
    orders = []
    for i in range(n_asks):
        node = int(rng.choice(nodes))
        orders.append(Order(f"s{i:02d}", ASK, node, zones[node], float(rng.uniform(0, price_hi)),
                            float(rng.uniform(0.1, 20.0))))
    for i in range(n_bids):
        node = int(rng.choice(nodes))
        orders.append(Order(f"b{i:02d}", BID, node, zones[node], float(rng.uniform(0, price_hi)),
                            float(rng.uniform(0.1, 20.0))))
    return orders


def auctioneer_net(matches, orders, hours):
    """Buyer payments minus seller receipts in $.

    Payments use the midpoint recomputed from the submitted orders and are
    booked per buyer; receipts use the recorded match price, booked per
    seller, so the two sides are accumulated independently.
    """
    price = {o.agent: o.price for o in orders}
    paid, received = {}, {}
    for m in matches:
        mid = (price[m.seller] + price[m.buyer]) / 2.0
        paid[m.buyer] = paid.get(m.buyer, 0.0) + m.quantity * mid * hours / 1000.0
        received[m.seller] = received.get(m.seller, 0.0) + m.quantity * m.price * hours / 1000.0
    return sum(paid.values()) - sum(received.values())
