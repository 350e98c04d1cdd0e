"""Order, match and outcome types plus the per-pool auction primitives."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from ..errors import ValidationError

ASK, BID = "ask", "bid"
NODAL, ZONAL, NETWORK = "nodal", "zonal", "network"
ROUNDS = (NODAL, ZONAL, NETWORK)
PENDING, APPROVED, BLOCKED = "pending", "approved", "blocked"


@dataclass(frozen=True)
class Order:
    """One agent's ask (seller) or bid (buyer) for one interval.

    Price in $/MWh, quantity in kW.
    """

    agent: str
    side: str
    node: int
    zone: int
    price: float
    quantity: float
    interval: int = 0

    def __post_init__(self):
        if self.side not in (ASK, BID):
            raise ValidationError(f"order {self.agent}: side must be 'ask' or 'bid'")
        if not (np.isfinite(self.price) and self.price >= 0):
            raise ValidationError(f"order {self.agent}: price must be finite and >= 0")
        if not (np.isfinite(self.quantity) and self.quantity > 0):
            raise ValidationError(f"order {self.agent}: quantity must be > 0")


@dataclass(frozen=True)
class Match:
    seller: str
    buyer: str
    quantity: float
    price: float
    round: str
    ask_price: float
    bid_price: float
    seller_node: int
    buyer_node: int
    status: str = PENDING
    reason: str = ""

    @property
    def seller_surplus(self):
        """(price - ask) * kW, in kW*$/MWh."""
        return (self.price - self.ask_price) * self.quantity

    @property
    def buyer_surplus(self):
        return (self.bid_price - self.price) * self.quantity


@dataclass
class Settlement:
    """Grid fallback cash flow for one agent: FIT credit or DLMP debit."""

    agent: str
    node: int
    kind: str  # "fit-sale" | "dlmp-purchase"
    quantity: float  # kW
    price: float  # $/MWh
    amount: float  # $ over the interval, positive = paid to the agent


@dataclass
class AuctionOutcome:
    orders: list
    matches: list
    residual: dict  # agent -> unmatched kW
    thresholds: list = field(default_factory=list)  # (round, pool, gamma)
    settlements: list = field(default_factory=list)
    interval: int = 0
    interval_hours: float = 0.25

    def approved(self):
        return [m for m in self.matches if m.status != BLOCKED]

    @property
    def traded(self):
        return sum(m.quantity for m in self.approved())

    @property
    def atp(self):
        """Quantity-weighted mean clearing price of the surviving matches."""
        ms = self.approved()
        q = sum(m.quantity for m in ms)
        if q <= 0:
            return float("nan")
        return sum(m.price * m.quantity for m in ms) / q

    def matched_by_agent(self):
        out = {o.agent: 0.0 for o in self.orders}
        for m in self.approved():
            out[m.seller] += m.quantity
            out[m.buyer] += m.quantity
        return out


def sort_orders(asks: Iterable[Order], bids: Iterable[Order]):
    """Asks by ascending price, bids by descending price; ties by agent id."""
    a = sorted(asks, key=lambda o: (o.price, o.agent))
    b = sorted(bids, key=lambda o: (-o.price, o.agent))
    return a, b


def average_price(asks, bids) -> float:
    """Mean of all submitted prices in the pool (the APM threshold)."""
    prices = [o.price for o in asks] + [o.price for o in bids]
    if not prices:
        raise ValueError("average price of an empty pool is undefined")
    return float(sum(prices) / len(prices))


def qualify(asks, bids, gamma: float, tol: float = 0.0):
    """Winners under the strict threshold rule: ask < gamma < bid."""
    return ([o for o in asks if o.price < gamma - tol],
            [o for o in bids if o.price > gamma + tol])


def budget_balance(matches, interval_hours: float) -> float:
    """Auctioneer net cash in $ over P2P matches: buyer payments minus seller
    receipts, each accumulated on its own side."""
    paid = {}
    received = {}
    for m in matches:
        cash = m.quantity * m.price * interval_hours / 1000.0
        paid[m.buyer] = paid.get(m.buyer, 0.0) + cash
        received[m.seller] = received.get(m.seller, 0.0) + cash
    return float(sum(paid.values()) - sum(received.values()))


def check_dlmp_caps(bids, dlmp: Optional[dict], tol=1e-9):
    if dlmp is None:
        return
    bad = [o.agent for o in bids if o.price > dlmp[o.node] + tol]
    if bad:
        raise ValidationError(f"bids above the nodal DLMP cap: {bad}", bad)
