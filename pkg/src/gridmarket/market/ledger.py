"""Tabular dumps of order books and match ledgers (CSV with a header row).

Order book columns: interval, agent, side, node, zone, price, quantity.
Match ledger columns: interval, seq, round, seller, buyer, seller_node,
buyer_node, quantity, ask, bid, price, status, reason.  Prices in $/MWh,
quantities in kW, floats written with ``repr``.
"""
from __future__ import annotations

import csv

ORDER_COLUMNS = ["interval", "agent", "side", "node", "zone", "price", "quantity"]
MATCH_COLUMNS = ["interval", "seq", "round", "seller", "buyer", "seller_node", "buyer_node", "quantity",
                 "ask", "bid", "price", "status", "reason"]


def order_rows(orders):
    for o in orders:
        yield [o.interval, o.agent, o.side, o.node, o.zone, repr(o.price), repr(o.quantity)]


def match_rows(interval, matches):
    for k, m in enumerate(matches):
        yield [interval, k, m.round, m.seller, m.buyer, m.seller_node, m.buyer_node, repr(m.quantity),
               repr(m.ask_price), repr(m.bid_price), repr(m.price), m.status, m.reason]


def write_order_book(stream, orders, header=True):
    w = csv.writer(stream, lineterminator="\n")
    if header:
        w.writerow(ORDER_COLUMNS)
    w.writerows(order_rows(orders))


def write_match_ledger(stream, interval, matches, header=True):
    w = csv.writer(stream, lineterminator="\n")
    if header:
        w.writerow(MATCH_COLUMNS)
    w.writerows(match_rows(interval, matches))
