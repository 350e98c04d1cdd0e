"""Multi-round double auction (nodal, zonal, network) with average pricing."""
from .kernels import greedy_match
from .mrda import match_round, run_mrda
from .orders import (APPROVED, ASK, BID, BLOCKED, NETWORK, NODAL, PENDING, ZONAL, AuctionOutcome, Match,
                     Order, Settlement, average_price, budget_balance, qualify, sort_orders)
from .settlement import energy_cost, grid_totals, payoffs, settle
from .strategy import BiddingStrategy, StrategyContext, UniformDLMPStrategy, agent_id

__all__ = [
    "APPROVED", "ASK", "BID", "BLOCKED", "NETWORK", "NODAL", "PENDING", "ZONAL", "AuctionOutcome", "Match",
    "Order", "Settlement", "average_price", "budget_balance", "qualify", "sort_orders", "greedy_match",
    "match_round", "run_mrda", "energy_cost", "grid_totals", "payoffs", "settle", "BiddingStrategy",
    "StrategyContext", "UniformDLMPStrategy", "agent_id",
]
