"""Nodal prices, relaxation exactness and a finite-difference price oracle."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..errors import GridMarketError
from .model import DispatchProblem, DispatchResult

# Denominator floor of the relative cone gap, in p.u.^2.  Lines carrying
# less than 0.01 p.u. apparent power are judged on the absolute gap scaled
# by this floor instead of their own (vanishing) l*v.
GAP_FLOOR = 1e-4


def extract_dlmp(result: DispatchResult) -> np.ndarray:
    """Active-power nodal prices in $/MWh.

    This is the sensitivity of the interval cost to the active load at each
    node: the balance multiplier plus, at sheddable nodes, the multipliers of
    the constraints whose data also scale with that load (the shedding cap
    and the reactive shedding ratio).
    """
    if not result.optimal:
        raise GridMarketError(f"cannot price a non-optimal dispatch (status {result.status})")
    return result.dlmp.copy()


def cone_gaps(result: DispatchResult, eps: float = GAP_FLOOR) -> np.ndarray:
    """Per-line relative gap ``(l v - P^2 - Q^2) / max(l v, eps)``."""
    net = result.problem.network
    base = net.base_mva * 1000.0
    lv = result.sq_current * result.v[net.line_src]
    s2 = (result.flow_p / base) ** 2 + (result.flow_q / base) ** 2
    return (lv - s2) / np.maximum(lv, eps)


def check_exactness(result: DispatchResult, eps: float = GAP_FLOOR) -> float:
    """Largest relative cone gap over all lines (0 for a network without lines)."""
    if not result.optimal:
        raise GridMarketError(f"cannot check a non-optimal dispatch (status {result.status})")
    g = cone_gaps(result, eps)
    return float(max(g.max(initial=0.0), 0.0))


def perturbed(problem: DispatchProblem, node, delta_kw: float) -> DispatchProblem:
    """Copy of ``problem`` with ``delta_kw`` extra active load at ``node``
    (reactive load held fixed)."""
    k = problem.network.index[node]
    load_p = problem.load_p.copy()
    load_p[k] += delta_kw
    return replace(problem, load_p=load_p)


def dlmp_fd_oracle(problem: DispatchProblem, node, eps: float, solve=None) -> float:
    """Forward-difference price at ``node``: d(cost rate)/d(load) in $/MWh."""
    if eps == 0:
        raise ValueError("finite-difference step must be non-zero")
    if solve is None:
        from . import solve as solve
    base = solve(problem)
    bumped = solve(perturbed(problem, node, eps))
    return (bumped.objective_rate - base.objective_rate) / eps * 1000.0
