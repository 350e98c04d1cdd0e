"""Network screening of P2P matches with linear sensitivity factors.

Around the interval's dispatch point the lossless DistFlow model gives,
for an extra active injection at node ``j``:

* every line on the root path of ``j`` carries that much less flow;
* squared voltage at ``i`` rises by ``2 * sum(r)`` over the lines shared by
  the root paths of ``i`` and ``j`` (per unit injection).

A match is applied as ``+q`` at the seller node and ``-q`` at the buyer
node.  Matches are screened one by one in ledger order against the running
predicted state, so an approval consumes headroom for later matches.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._accel import njit, pick
from .dispatch.model import DispatchResult
from .errors import GridMarketError, StaleSensitivityError
from .market.orders import APPROVED, BLOCKED
from .netmodel import Network


@njit(cache=True)
def _shared_path_r(order, parent, parent_line, r, incidence):
    # shared[i, j] is the root-path resistance of lca(i, j); going down the
    # tree in BFS order, row i equals its parent's row outside i's subtree
    n = parent.shape[0]
    out = np.zeros((n, n))
    for k in range(1, n):
        i = order[k]
        p = parent[i]
        line = parent_line[i]
        ri = out[p, p] + r[line]
        for j in range(n):
            if incidence[line, j]:
                out[i, j] = ri
            else:
                out[i, j] = out[p, j]
    return out


def _shared_path_r_numpy(order, parent, parent_line, r, incidence):
    m = incidence.astype(np.float64)
    return m.T @ (r[:, None] * m)


@dataclass(frozen=True)
class SensitivitySet:
    """Linear sensitivities around one interval's dispatch.

    ``dv_dp[i, j]``: change in squared voltage at node i per kW injected at
    node j (p.u.^2 per kW).  ``dflow_dp[k, j]``: change of active flow on
    line k per kW injected at node j (kW per kW).  Base arrays hold the
    operating point the factors were computed at.
    """

    network: Network
    dv_dp: np.ndarray
    dflow_dp: np.ndarray
    v: np.ndarray
    flow_p: np.ndarray
    flow_q: np.ndarray
    interval: int

    @property
    def dv_dp_pu(self):
        """Same as ``dv_dp`` per p.u. of injection."""
        return self.dv_dp * self.network.base_mva * 1000.0


def compute_sensitivities(network: Network, result: DispatchResult, interval: int = 0,
                          use_numba=None) -> SensitivitySet:
    if not result.optimal:
        raise GridMarketError("sensitivities need an optimal dispatch")
    base = network.base_mva * 1000.0
    fn = pick(_shared_path_r, _shared_path_r_numpy, use_numba)
    shared = fn(np.asarray(network.bfs_order, dtype=np.int64), network.parent, network.parent_line, network.r,
                network.path_incidence)
    dv = 2.0 * shared / base
    dflow = -network.path_incidence.astype(np.float64)
    return SensitivitySet(network, dv, dflow, result.v.copy(), result.flow_p.copy(), result.flow_q.copy(),
                          interval)


@dataclass
class VetDecision:
    """One row of the vetting report."""

    seller: str
    buyer: str
    quantity: float
    status: str
    reason: str
    binding: str  # most loaded element after the trade
    margin_used: float  # loading of that element relative to its tightened limit


class _State:
    """Running predicted operating point during cumulative vetting."""

    def __init__(self, sens: SensitivitySet, margin: float):
        net = sens.network
        self.sens = sens
        self.v = sens.v.copy()
        self.p = sens.flow_p.copy()
        self.q = sens.flow_q
        self.v_lo = np.array([n.v_min ** 2 for n in net.nodes]) * (1 + margin)
        self.v_hi = np.array([n.v_max ** 2 for n in net.nodes]) * (1 - margin)
        self.v_lo[net.index[net.root]] = -np.inf
        self.v_hi[net.index[net.root]] = np.inf
        self.s_max = np.array([ln.flow_limit for ln in net.lines]) * (1 - margin)

    def delta(self, s_idx, b_idx, q):
        dv = q * (self.sens.dv_dp[:, s_idx] - self.sens.dv_dp[:, b_idx])
        dp = q * (self.sens.dflow_dp[:, s_idx] - self.sens.dflow_dp[:, b_idx])
        return dv, dp

    def check(self, dv, dp):
        """Return (reason or "", binding element, loading) for the state after a move."""
        net = self.sens.network
        v = self.v + dv
        p = self.p + dp
        s_old = np.hypot(self.p, self.q)
        s_new = np.hypot(p, self.q)
        reason = ""
        # only block where the move pushes further into a violated limit
        over = np.flatnonzero((s_new > self.s_max) & (s_new > s_old + 1e-12))
        if over.size:
            reason = f"line overload: {net.lines[over[0]].name}"
        else:
            under = np.flatnonzero((v < self.v_lo) & (dv < 0))
            high = np.flatnonzero((v > self.v_hi) & (dv > 0))
            if under.size:
                reason = f"undervoltage: node {net.node_ids[under[0]]}"
            elif high.size:
                reason = f"overvoltage: node {net.node_ids[high[0]]}"
        # loading of every element relative to its tightened limit
        loads = [(float(x), f"line {ln.name}") for x, ln in zip(s_new / self.s_max, net.lines)]
        loads += [(float(lo / vv), f"node {nid} v_min") for lo, vv, nid in zip(self.v_lo, v, net.node_ids)
                  if np.isfinite(lo)]
        loads += [(float(vv / hi), f"node {nid} v_max") for hi, vv, nid in zip(self.v_hi, v, net.node_ids)
                  if np.isfinite(hi)]
        loading, binding = max(loads) if loads else (0.0, "")
        return reason, binding, loading

    def apply(self, dv, dp):
        self.v = self.v + dv
        self.p = self.p + dp


def vet_transaction(match, sens: SensitivitySet, interval: int, margin: float = 0.02, state=None):
    """Screen one match; returns ``(match with status, VetDecision)``.

    ``state`` carries the cumulative predicted point between calls (see
    :func:`vet_matches`); without it the match is judged against the base
    point alone.
    """
    if interval != sens.interval:
        raise StaleSensitivityError(f"sensitivities belong to interval {sens.interval}, not {interval}")
    net = sens.network
    st = state if state is not None else _State(sens, margin)
    dv, dp = st.delta(net.index[match.seller_node], net.index[match.buyer_node], match.quantity)
    reason, binding, loading = st.check(dv, dp)
    if reason:
        return replace(match, status=BLOCKED, reason=reason), VetDecision(
            match.seller, match.buyer, match.quantity, BLOCKED, reason, binding, loading)
    st.apply(dv, dp)
    return replace(match, status=APPROVED, reason=""), VetDecision(
        match.seller, match.buyer, match.quantity, APPROVED, "", binding, loading)


def vet_matches(matches, sens: SensitivitySet, interval: int, margin: float = 0.02):
    """Cumulative vetting in ledger order; returns ``(matches, report)``."""
    st = _State(sens, margin)
    out, report = [], []
    for m in matches:
        m2, dec = vet_transaction(m, sens, interval, margin, st)
        out.append(m2)
        report.append(dec)
    return out, report


def predicted_state(sens: SensitivitySet, injections: dict):
    """Predicted (v, P) after extra injections ``{node id: kW}``."""
    net = sens.network
    dp = np.zeros(net.n_nodes)
    for nid, kw in injections.items():
        dp[net.index[nid]] += kw
    return sens.v + sens.dv_dp @ dp, sens.flow_p + sens.dflow_dp @ dp
