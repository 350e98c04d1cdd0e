from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain
from gridmarket.dispatch import GRID_CONNECTED, DispatchProblem, solve, units_for
from gridmarket.errors import StaleSensitivityError
from gridmarket.market import APPROVED, BLOCKED, NETWORK, Match
from gridmarket.netmodel import Network
from gridmarket.vetting import compute_sensitivities, predicted_state, vet_matches, vet_transaction


def dispatch(net, scale=1.0):
    lp = np.array([n.load_p for n in net.nodes]) * scale
    lq = np.array([n.load_q for n in net.nodes]) * scale
    return solve(DispatchProblem(net, lp, lq, units_for(net, GRID_CONNECTED, 60.0), 1000.0))


def trade(seller_node, buyer_node, qty):
    return Match(f"n{seller_node:03d}", f"n{buyer_node:03d}", qty, 40.0, NETWORK, 30.0, 50.0, seller_node, buyer_node)


@pytest.fixture(scope="module")
def sens33(ieee33):
    return compute_sensitivities(ieee33, dispatch(ieee33), interval=5)


def test_injection_relieves_root_path(ieee33, sens33):
    for nid in (18, 25, 33):
        j = ieee33.index[nid]
        on_path = set()
        cur = nid
        while cur != ieee33.root:
            k = ieee33.parent_line[ieee33.index[cur]]
            on_path.add(int(k))
            cur = ieee33.lines[k].src
        for k in range(ieee33.n_lines):
            assert sens33.dflow_dp[k, j] == (-1.0 if k in on_path else 0.0)


def test_injection_raises_own_voltage(ieee33, sens33):
    for nid in ieee33.node_ids:
        j = ieee33.index[nid]
        if nid == ieee33.root:
            assert sens33.dv_dp[j, j] == 0.0
        else:
            assert sens33.dv_dp[j, j] > 0.0
    assert np.all(sens33.dv_dp >= 0) and np.allclose(sens33.dv_dp, sens33.dv_dp.T)


def test_two_bus_voltage_sensitivity(two_bus):
    sens = compute_sensitivities(two_bus, dispatch(two_bus))
    assert sens.dv_dp_pu[1, 1] == pytest.approx(2 * two_bus.lines[0].r)


@pytest.mark.parametrize("use_numba", [True, False])
def test_kernels_agree(ieee33, use_numba):
    res = dispatch(ieee33)
    a = compute_sensitivities(ieee33, res, use_numba=use_numba)
    b = compute_sensitivities(ieee33, res, use_numba=not use_numba)
    assert np.allclose(a.dv_dp, b.dv_dp, rtol=0, atol=1e-15)


def test_small_trade_in_unloaded_network():
    net = chain(5, loads=[0.0] * 5)
    sens = compute_sensitivities(net, dispatch(net), interval=0)
    m, dec = vet_transaction(trade(3, 4, 1.0), sens, 0)
    assert m.status == APPROVED and dec.reason == ""


def near_limit_feeder(ieee33, fraction):
    # rate line 5-6 so that the dispatch flow sits at the given fraction of it
    res = dispatch(ieee33)
    k = ieee33.line_index[(5, 6)]
    s = float(np.hypot(res.flow_p[k], res.flow_q[k]))
    lines = list(ieee33.lines)
    lines[k] = replace(lines[k], flow_limit=s / fraction)
    net = Network(ieee33.nodes, lines, ieee33.root, ieee33.base_kv, ieee33.base_mva, ieee33.generators,
                  ieee33.zones, ieee33.name)
    base = dispatch(net)
    assert np.hypot(base.flow_p[k], base.flow_q[k]) == pytest.approx(fraction * lines[k].flow_limit, rel=1e-6)
    return net, compute_sensitivities(net, base, interval=3)


def test_near_limit_line_blocks(ieee33):
    _, sens = near_limit_feeder(ieee33, 0.995)
    m, dec = vet_transaction(trade(2, 6, 10.0), sens, 3)
    assert m.status == BLOCKED
    assert m.reason == "line overload: 5-6"
    assert dec.reason == m.reason


def test_relieving_trade_passes_overloaded_line(ieee33):
    _, sens = near_limit_feeder(ieee33, 0.995)
    m, _ = vet_transaction(trade(6, 2, 10.0), sens, 3)
    assert m.status == APPROVED


def test_self_trade_has_no_effect(sens33):
    m, dec = vet_transaction(trade(18, 18, 50.0), sens33, 5)
    assert m.status == APPROVED
    # the post-trade loading equals that of another no-op trade and differs from a real one
    other = vet_transaction(trade(3, 3, 1.0), sens33, 5)[1]
    real = vet_transaction(trade(18, 2, 50.0), sens33, 5)[1]
    assert (dec.binding, dec.margin_used) == (other.binding, other.margin_used)
    assert real.margin_used != dec.margin_used


def test_stale_sensitivities(sens33):
    with pytest.raises(StaleSensitivityError):
        vet_transaction(trade(2, 3, 1.0), sens33, 6)


def test_cumulative_vetting(ieee33):
    # 96% loading: each 10 kW trade fits alone, the batch does not
    net, sens = near_limit_feeder(ieee33, 0.96)
    limit = net.lines[net.line_index[(5, 6)]].flow_limit
    q = 0.004 * limit
    batch = [trade(2, 6, q) for _ in range(8)]
    for m in batch:
        assert vet_transaction(m, sens, 3)[0].status == APPROVED
    out, report = vet_matches(batch, sens, 3)
    status = [m.status for m in out]
    assert status[0] == APPROVED and status[-1] == BLOCKED
    assert status == sorted(status)  # approvals first, then blocks
    assert [d.status for d in report] == status
    assert vet_matches(batch, sens, 3)[0] == out


@given(st.sampled_from([2, 6, 12, 18, 22, 25, 30, 33]), st.floats(0.005, 0.05))
@settings(max_examples=20, deadline=None)
def test_linear_fidelity(ieee33, node, share):
    # predicted voltage change vs a re-solved dispatch, for injections up to 5% of base load
    base = dispatch(ieee33)
    sens = compute_sensitivities(ieee33, base)
    delta = share * sum(n.load_p for n in ieee33.nodes)
    lp = np.array([n.load_p for n in ieee33.nodes])
    lq = np.array([n.load_q for n in ieee33.nodes])
    inj = np.zeros(ieee33.n_nodes)
    inj[ieee33.index[node]] = delta
    again = solve(DispatchProblem(ieee33, lp, lq, units_for(ieee33, GRID_CONNECTED, 60.0), 1000.0,
                                  fixed_injection=inj))
    pred, _ = predicted_state(sens, {node: delta})
    true_dv = again.v - base.v
    pred_dv = pred - base.v
    assert np.linalg.norm(pred_dv - true_dv) <= 0.10 * np.linalg.norm(true_dv)
