import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain
from gridmarket.dispatch import (GRID_CONNECTED, ISLANDED, DispatchProblem, Unit, build_opf, check_exactness,
                                 dlmp_fd_oracle, extract_dlmp, solve, solve_lp, solve_socp, units_for)
from gridmarket.dispatch.dump import dump_model, read_dump
from gridmarket.errors import GridMarketError, InfeasibleError, NonConvergenceError, ValidationError
from gridmarket.netmodel import Line, Network, Node

VOLL = 1000.0


def loads(net, scale=1.0):
    return (np.array([n.load_p for n in net.nodes]) * scale, np.array([n.load_q for n in net.nodes]) * scale)


def problem(net, mode=GRID_CONNECTED, lmp=50.0, scale=1.0, **kw):
    lp, lq = loads(net, scale)
    return DispatchProblem(net, lp, lq, units_for(net, mode, lmp), VOLL, mode, **kw)


def assert_fd_agrees(pb, result, nodes=None, step=0.1):
    net = pb.network
    for nid in nodes or net.node_ids:
        fd = dlmp_fd_oracle(pb, nid, step)
        dual = result.dlmp[net.index[nid]]
        assert abs(dual - fd) <= max(1e-3 * abs(fd), 0.01), (nid, dual, fd)


# --- model structure -------------------------------------------------------

def test_one_cone_per_line(ieee33):
    assert build_opf(problem(ieee33)).n_cones == 32


def test_islanded_has_no_import(ieee33):
    pb = problem(ieee33, ISLANDED)
    assert all(u.kind != "grid-root" for u in pb.units)
    res = solve(pb)
    assert res.total_shed > 0


def test_contradictory_bounds_rejected(two_bus):
    pb = problem(two_bus)
    pb.units.append(Unit("bad", 2, 10.0, 5.0, 20.0))
    with pytest.raises(ValidationError, match="contradictory"):
        build_opf(pb)


def test_inverted_voltage_bounds_rejected():
    net = chain(2)
    net = Network([net.nodes[0], Node(2, 100.0, 0.0, 1.05, 0.95)], net.lines, 1, generators=net.generators)
    with pytest.raises(ValidationError):
        build_opf(DispatchProblem(net, [0, 100], [0, 0], units_for(net, GRID_CONNECTED, 30.0), VOLL))


# --- prices ------------------------------------------------------------------

def test_zero_load_dispatch():
    # a symmetric tie (same price both ways) makes the zero-flow dual unique
    net = chain(5, loads=[0.0] * 5)
    units = [Unit("tie", 1, -1000.0, 1000.0, 30.0, -1000.0, 1000.0, "grid-root")]
    pb = DispatchProblem(net, np.zeros(5), np.zeros(5), units, VOLL)
    res = solve(pb)
    assert abs(res.objective_rate) < 1e-6
    assert np.allclose(res.gen_p["tie"], 0.0, atol=1e-6)
    assert np.allclose(res.dlmp, 30.0, atol=0.01)
    assert check_exactness(res) == 0.0 or check_exactness(res) < 1e-9
    assert_fd_agrees(pb, res)


def test_two_bus_lossless_price():
    net = chain(2, r=1e-9, x=1e-9)
    pb = DispatchProblem(net, [0, 100], [0, 0], units_for(net, GRID_CONNECTED, 30.0), VOLL)
    res = solve(pb)
    assert abs(res.dlmp[1] - 30.0) <= 30e-3
    assert abs(res.dlmp[0] - res.dlmp[1]) < 0.01
    assert_fd_agrees(pb, res)


def test_two_bus_lossy_closed_form():
    # with x = 0 and Q = 0: P0 = Pd + r P0^2, so dP0/dPd = 1 / (1 - 2 r P0)
    r = 0.02
    net = chain(2, r=r, x=0.0)
    pb = DispatchProblem(net, [0, 2000.0], [0, 0], units_for(net, GRID_CONNECTED, 30.0), VOLL)
    res = solve(pb)
    pd = 2000.0 / 1e4
    p0 = (1 - np.sqrt(1 - 4 * r * pd)) / (2 * r)
    assert res.gen_p["grid"] == pytest.approx(p0 * 1e4, rel=1e-7)
    assert res.dlmp[1] == pytest.approx(30.0 / (1 - 2 * r * p0), rel=1e-6)


def test_normal_33_bus_prices_near_marginal_cost(ieee33):
    # the DG at node 1 is marginal when the import price is above its cost
    res = solve(problem(ieee33, lmp=60.0, scale=0.3))
    assert res.gen_p["dg1"] < 2500.0 - 1e-3
    loaded = [k for k, n in enumerate(ieee33.nodes) if n.load_p > 0]
    # losses only ever add to the price downstream of the marginal unit
    assert np.all(res.dlmp[loaded] >= 50.0 - 0.01) and np.all(res.dlmp[loaded] <= 52.5)
    assert res.dlmp[0] == pytest.approx(50.0, abs=0.01)


def test_islanded_shedding_prices_at_voll():
    # Q = 0 and x = 0: the marginal kW at a shedding node is simply not served
    net = chain(4, r=0.005, x=0.0, loads=[0, 200, 200, 200])
    dg = Unit("dg", 1, 0.0, 300.0, 50.0, -500.0, 500.0)
    pb = DispatchProblem(net, [0, 200, 200, 200], np.zeros(4), [dg], VOLL, ISLANDED)
    res = solve(pb)
    shed = res.shed_p > 1e-3
    assert shed.any()
    assert np.allclose(res.dlmp[shed], VOLL, rtol=1e-3)
    assert_fd_agrees(pb, res)


def test_islanded_33_bus_matches_fd(ieee33):
    pb = problem(ieee33, ISLANDED)
    res = solve(pb)
    assert_fd_agrees(pb, res, nodes=[2, 6, 12, 18, 22, 25, 30, 33])


def test_extract_requires_optimal(two_bus):
    res = solve(problem(two_bus))
    res.status = "infeasible"
    with pytest.raises(GridMarketError):
        extract_dlmp(res)


def test_fd_zero_step(two_bus):
    with pytest.raises(ValueError):
        dlmp_fd_oracle(problem(two_bus), 2, 0.0)


# --- exactness -----------------------------------------------------------------

def test_exact_on_33_bus(ieee33):
    for mode in (GRID_CONNECTED, ISLANDED):
        assert check_exactness(solve(problem(ieee33, mode))) <= 1e-6


def test_zero_load_gap_is_zero(ieee33):
    n = ieee33.n_nodes
    res = solve(DispatchProblem(ieee33, np.zeros(n), np.zeros(n), units_for(ieee33, GRID_CONNECTED, 30.0), VOLL))
    assert check_exactness(res) < 1e-12


def test_negative_cost_injection_is_inexact(ieee33):
    # a paid-to-produce unit that cannot export burns the excess as fake losses
    units = [Unit("grid", 1, 0.0, 10000.0, 30.0, -10000.0, 10000.0, "grid-root"), Unit("neg", 18, 0.0, 500.0, -100.0)]
    lp, lq = loads(ieee33, 0.1)
    res = solve(DispatchProblem(ieee33, lp, lq, units, VOLL))
    assert check_exactness(res) > 1e-3
    assert not res.polished


# --- errors --------------------------------------------------------------------

def test_firm_load_beyond_capacity_is_infeasible():
    net = chain(3, loads=[0, 200, 200])
    dg = Unit("dg", 1, 0.0, 100.0, 50.0, -500.0, 500.0)
    pb = DispatchProblem(net, [0, 200, 200], [0, 0, 0], [dg], VOLL, ISLANDED, firm_load=[0, 200, 200])
    with pytest.raises(InfeasibleError) as exc:
        solve(pb)
    assert exc.value.bound_set


def test_iteration_cap(ieee33):
    with pytest.raises(NonConvergenceError):
        solve_socp(build_opf(problem(ieee33)), max_iter=1)


def test_unknown_method(two_bus):
    with pytest.raises(ValueError):
        solve(problem(two_bus), "simplex")


# --- result invariants ---------------------------------------------------------

@pytest.mark.parametrize("mode", [GRID_CONNECTED, ISLANDED])
def test_result_invariants(ieee33, mode):
    pb = problem(ieee33, mode)
    res = solve(pb)
    assert res.balance_residual() <= 1e-6
    assert np.all(res.shed_p >= -1e-7) and np.all(res.shed_p <= pb.load_p + 1e-7)
    vmin = np.array([n.v_min for n in ieee33.nodes]) ** 2
    vmax = np.array([n.v_max for n in ieee33.nodes]) ** 2
    assert np.all(res.v >= vmin - 1e-6) and np.all(res.v <= vmax + 1e-6)


@given(st.floats(0.2, 1.5), st.floats(0.01, 0.5))
@settings(max_examples=12, deadline=None)
def test_monotone_stress(scale, bump):
    net = chain(5, loads=[0, 300, 250, 200, 150], r=0.01, x=0.008)
    dg = Unit("dg", 1, 0.0, 600.0, 50.0, -600.0, 600.0)
    lo = solve(DispatchProblem(net, np.array([0, 300, 250, 200, 150]) * scale, np.zeros(5), [dg], VOLL, ISLANDED))
    hi = solve(DispatchProblem(net, np.array([0, 300, 250, 200, 150]) * scale * (1 + bump), np.zeros(5), [dg], VOLL,
                               ISLANDED))
    assert hi.objective_rate >= lo.objective_rate - 1e-6


def shed_case(net, scale):
    lp, lq = loads(net, scale)
    units = units_for(net, ISLANDED, 50.0)
    cap = sum(u.p_max for u in units)
    return DispatchProblem(net, lp, lq, units, VOLL, ISLANDED), max(0.0, lp.sum() - cap)


@pytest.mark.parametrize("scale", [0.5, 1.0, 1.5])
def test_shedding_bound_linear(ieee33, scale):
    # lossless model: shedding equals the capacity deficit exactly
    pb, deficit = shed_case(ieee33, scale)
    res = solve_lp(pb)
    assert res.total_shed <= deficit + 1e-6
    assert res.total_shed == pytest.approx(deficit, abs=1e-4)


@pytest.mark.parametrize("scale", [0.5, 1.0, 1.5])
def test_shedding_bound_with_losses(ieee33, scale):
    pb, deficit = shed_case(ieee33, scale)
    res = solve(pb)
    assert deficit - 1e-4 <= res.total_shed <= deficit + res.losses + 1e-4


# --- cross-checks --------------------------------------------------------------

def test_lp_agrees_with_socp_when_nearly_lossless():
    net = chain(6, r=1e-6, x=1e-6, loads=[0, 100, 200, 300, 150, 250])
    for mode, units in ((GRID_CONNECTED, units_for(net, GRID_CONNECTED, 40.0)),
                        (ISLANDED, [Unit("dg", 1, 0.0, 600.0, 50.0, -1000.0, 1000.0)])):
        pb = DispatchProblem(net, [0, 100, 200, 300, 150, 250], np.zeros(6), units, VOLL, mode)
        a, b = solve(pb), solve(pb, "lp")
        assert a.objective_rate == pytest.approx(b.objective_rate, rel=1e-5)
        assert np.allclose(a.dlmp, b.dlmp, rtol=1e-3, atol=0.01)


def test_lp_prices_match_fd(five_bus):
    pb = problem(five_bus, lmp=40.0)
    res = solve_lp(pb)
    for nid in five_bus.node_ids:
        fd = dlmp_fd_oracle(pb, nid, 0.1, solve=solve_lp)
        assert abs(res.dlmp[five_bus.index[nid]] - fd) <= max(1e-3 * abs(fd), 0.01)


def test_dump_round_trip(five_bus):
    model = build_opf(problem(five_bus))
    res = solve_socp(model)
    text = dump_model(model, res)
    parsed = read_dump(text)
    assert len(parsed["variables"]) == len(model.var_names)
    assert len(parsed["rows"]) == len(model.row_names)
    buf = io.StringIO()
    dump_model(model, res, buf)
    assert buf.getvalue() == text
