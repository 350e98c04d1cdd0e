"""Relaxed branch-flow (DistFlow) OPF as a second-order cone program.

Per line ``k = (i, j)``: flows ``P, Q`` at the sending end and squared
current ``l``; per node: squared voltage ``v``; per unit: ``p, q``; per
offer: ``p``; per sheddable node: ``ps, qs``.  Rows, in cone order:

* zero cone: active/reactive nodal balance, voltage drop along each line,
  root voltage, proportional reactive shedding, pinned variables
* non-negative cone: variable bounds
* one 4-dim second-order cone per line: ``||(2P, 2Q, l - v_i)|| <= l + v_i``
  (the rotated form of ``P^2 + Q^2 <= l v_i``)

Everything is per-unit on the network MVA base; cost coefficients stay in
$/MWh so the balance multipliers come out directly in $/MWh.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

from ..errors import InfeasibleError, NonConvergenceError, NumericalFailureError
from .model import DispatchProblem, DispatchResult

log = logging.getLogger(__name__)

# Tolerance ladder: try the tightest first, fall back when the solver stalls.
# The loosest rung matches the required 1e-8 relative duality gap.
TOL_LADDER = (1e-10, 1e-9, 1e-8)
# Largest nodal balance change (p.u.) the current polish may introduce.
POLISH_TOL = 1e-8
MAX_ITER = 200


@dataclass
class OPFModel:
    """Conic program ``min c'x  s.t.  A x + s = b,  s in K``."""

    problem: DispatchProblem
    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    cones: list  # [(kind, size)] with kind in {"zero", "nonneg", "soc"}
    var_names: list
    row_names: list
    lb: np.ndarray
    ub: np.ndarray
    idx: dict = field(default_factory=dict)

    @property
    def n_cones(self):
        return sum(1 for kind, _ in self.cones if kind == "soc")

    def rows_of(self, kind):
        start = 0
        for k, size in self.cones:
            if k == kind:
                yield from range(start, start + size)
            start += size


class _Rows:
    def __init__(self):
        self.entries = []  # (row, col, val)
        self.b = []
        self.names = []

    def add(self, coeffs, rhs, name):
        r = len(self.b)
        for col, val in coeffs:
            if val != 0.0:
                self.entries.append((r, col, val))
        self.b.append(rhs)
        self.names.append(name)
        return r


def build_opf(problem: DispatchProblem) -> OPFModel:
    problem.validate()
    net = problem.network
    base = net.base_mva * 1000.0  # kW per p.u.
    N, L = net.n_nodes, net.n_lines
    r, x = net.r, net.x

    names, lb, ub, cost = [], [], [], []

    def var(name, lo=-np.inf, hi=np.inf, c=0.0):
        names.append(name)
        lb.append(lo)
        ub.append(hi)
        cost.append(c)
        return len(names) - 1

    iP = [var(f"P[{ln.name}]") for ln in net.lines]
    iQ = [var(f"Q[{ln.name}]") for ln in net.lines]
    iL = [var(f"l[{ln.name}]", 0.0, ln.current_limit) for ln in net.lines]
    iv = []
    for nd in net.nodes:
        if nd.id == net.root:
            iv.append(var(f"v[{nd.id}]", problem.root_voltage ** 2, problem.root_voltage ** 2))
        else:
            iv.append(var(f"v[{nd.id}]", nd.v_min ** 2, nd.v_max ** 2))
    ipg, iqg = {}, {}
    for u in problem.units:
        ipg[u.name] = var(f"p[{u.name}]", u.p_min / base, u.p_max / base, u.cost)
        iqg[u.name] = var(f"q[{u.name}]", u.q_min / base, u.q_max / base)
    ipo = {}
    for o in problem.offers:
        ipo[o.agent] = var(f"po[{o.agent}]", 0.0, o.quantity / base, o.price)
    sheddable = problem.sheddable
    ips, iqs = {}, {}
    for k, nd in enumerate(net.nodes):
        if sheddable[k] > 0:
            ips[k] = var(f"ps[{nd.id}]", 0.0, sheddable[k] / base, problem.voll)
            iqs[k] = var(f"qs[{nd.id}]")

    zero, nonneg = _Rows(), _Rows()
    # nodal balance: inflow - losses - outflow + generation + shedding = load - fixed injection
    p_terms = [[] for _ in range(N)]
    q_terms = [[] for _ in range(N)]
    for k in range(L):
        i, j = net.line_src[k], net.line_dst[k]
        p_terms[j] += [(iP[k], 1.0), (iL[k], -r[k])]
        q_terms[j] += [(iQ[k], 1.0), (iL[k], -x[k])]
        p_terms[i].append((iP[k], -1.0))
        q_terms[i].append((iQ[k], -1.0))
    for u in problem.units:
        p_terms[net.index[u.node]].append((ipg[u.name], 1.0))
        q_terms[net.index[u.node]].append((iqg[u.name], 1.0))
    for o in problem.offers:
        p_terms[net.index[o.node]].append((ipo[o.agent], 1.0))
    for k in ips:
        p_terms[k].append((ips[k], 1.0))
        q_terms[k].append((iqs[k], 1.0))
    pbal = [zero.add(p_terms[k], (problem.load_p[k] - problem.fixed_injection[k]) / base, f"pbal[{nd.id}]")
            for k, nd in enumerate(net.nodes)]
    qbal = [zero.add(q_terms[k], problem.load_q[k] / base, f"qbal[{nd.id}]")
            for k, nd in enumerate(net.nodes)]
    for k, ln in enumerate(net.lines):
        i, j = net.line_src[k], net.line_dst[k]
        zero.add([(iv[j], 1.0), (iv[i], -1.0), (iP[k], 2 * r[k]), (iQ[k], 2 * x[k]),
                  (iL[k], -(r[k] ** 2 + x[k] ** 2))], 0.0, f"vdrop[{ln.name}]")
    shed_ratio = {}
    for k in ips:
        ratio = problem.load_q[k] / problem.load_p[k] if problem.load_p[k] > 0 else 0.0
        shed_ratio[k] = (ratio, zero.add([(iqs[k], 1.0), (ips[k], -ratio)], 0.0, f"qshed[{net.nodes[k].id}]"))

    lb_a, ub_a = np.array(lb), np.array(ub)
    cap_rows = {}
    for col in range(len(names)):
        lo, hi = lb_a[col], ub_a[col]
        if np.isfinite(lo) and np.isfinite(hi) and hi - lo <= 1e-15:
            zero.add([(col, 1.0)], lo, f"fix:{names[col]}")
            continue
        if np.isfinite(lo) and not names[col].startswith("l["):
            nonneg.add([(col, -1.0)], -lo, f"lb:{names[col]}")
        if np.isfinite(hi):
            row = nonneg.add([(col, 1.0)], hi, f"ub:{names[col]}")
            if names[col].startswith("ps["):
                cap_rows[col] = row

    soc_entries, soc_names = [], []
    for k, ln in enumerate(net.lines):
        i = net.line_src[k]
        base_row = 4 * k
        soc_entries += [(base_row, iL[k], -1.0), (base_row, iv[i], -1.0),
                        (base_row + 1, iP[k], -2.0),
                        (base_row + 2, iQ[k], -2.0),
                        (base_row + 3, iL[k], -1.0), (base_row + 3, iv[i], 1.0)]
        soc_names += [f"soc[{ln.name}].{t}" for t in range(4)]

    nz, nn, ns = len(zero.b), len(nonneg.b), 4 * L
    rows = ([e for e in zero.entries]
            + [(rr + nz, c, v) for rr, c, v in nonneg.entries]
            + [(rr + nz + nn, c, v) for rr, c, v in soc_entries])
    ri, ci, vv = zip(*rows)
    A = sp.csc_matrix((vv, (ri, ci)), shape=(nz + nn + ns, len(names)))
    b = np.concatenate([zero.b, nonneg.b, np.zeros(ns)])
    cones = [("zero", nz), ("nonneg", nn)] + [("soc", 4)] * L
    idx = dict(P=iP, Q=iQ, l=iL, v=iv, pg=ipg, qg=iqg, po=ipo, ps=ips, qs=iqs,
               pbal=pbal, qbal=qbal, cap=cap_rows, qshed=shed_ratio, n_zero=nz)
    return OPFModel(problem, np.array(cost), A, b, cones, names,
                    zero.names + nonneg.names + soc_names, lb_a, ub_a, idx)


def _clarabel_cones(cones):
    out = []
    for kind, size in cones:
        if size == 0:
            continue
        if kind == "zero":
            out.append(clarabel.ZeroConeT(size))
        elif kind == "nonneg":
            out.append(clarabel.NonnegativeConeT(size))
        else:
            out.append(clarabel.SecondOrderConeT(size))
    return out


def _settings(tol, max_iter=MAX_ITER):
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.max_iter = max_iter
    s.tol_feas = s.tol_gap_rel = s.tol_gap_abs = tol
    s.reduced_tol_feas = s.reduced_tol_gap_rel = s.reduced_tol_gap_abs = 100 * tol
    s.iterative_refinement_reltol = 1e-14
    s.iterative_refinement_abstol = 1e-14
    s.iterative_refinement_max_iter = 50
    s.presolve_enable = False
    return s


def run_conic(model: OPFModel, max_iter=MAX_ITER):
    """Solve the conic program; returns ``(x, z, obj, iterations)``.

    Walks down :data:`TOL_LADDER` until a rung is met in full.  If only
    reduced accuracy is reached on the last rung the point is still returned.
    """
    n = len(model.c)
    P = sp.csc_matrix((n, n))
    S = clarabel.SolverStatus
    label = model.problem.label or "dispatch"
    cones = _clarabel_cones(model.cones)
    total = 0
    almost = None
    for tol in TOL_LADDER:
        sol = clarabel.DefaultSolver(P, model.c, model.A, model.b, cones, _settings(tol, max_iter)).solve()
        total += int(sol.iterations)
        st = sol.status
        if st == S.Solved:
            return np.asarray(sol.x), np.asarray(sol.z), float(sol.obj_val), total
        if st == S.AlmostSolved:
            almost = sol
        if st in (S.PrimalInfeasible, S.AlmostPrimalInfeasible):
            z = np.abs(np.asarray(sol.z))
            support = [model.row_names[k] for k in np.flatnonzero(z > 1e-6 * max(z.max(), 1e-300))
                       if not model.row_names[k].startswith("soc[")]
            raise InfeasibleError(f"{label}: OPF infeasible; certificate rows {support[:20]}", support)
        log.debug("%s: status %s at tolerance %g", label, st, tol)
    if almost is not None:
        log.warning("%s: solver reached reduced accuracy only", label)
        return np.asarray(almost.x), np.asarray(almost.z), float(almost.obj_val), total
    if st == S.MaxIterations:
        raise NonConvergenceError(f"{label}: no convergence after {sol.iterations} iterations")
    raise NumericalFailureError(f"{label}: solver status {st}")


def polish_currents(model: OPFModel, x):
    """Move the squared currents onto the cone surface.

    An interior-point solution leaves every ``l`` slightly inside its cone
    (``l v > P^2 + Q^2`` by roughly the barrier parameter).  When the
    relaxation is exact the optimum lies on the surface, so we set
    ``l = (P^2 + Q^2) / v_i`` and re-propagate voltages down the tree.  The
    polished point is returned only if the loss change it implies keeps every
    nodal balance within ``POLISH_TOL`` and all bounds still hold; otherwise
    ``None`` (the relaxation is not exact there and the raw point stands).
    """
    net = model.problem.network
    idx = model.idx
    iP, iQ, iL, iv = (np.asarray(idx[k]) for k in ("P", "Q", "l", "v"))
    r, xr = net.r, net.x
    P, Q = x[iP], x[iQ]
    ell0 = x[iL]
    v = x[iv].copy()
    ell = ell0.copy()
    for _ in range(3):
        for j in net.bfs_order[1:]:
            k = net.parent_line[j]
            i = net.line_src[k]
            ell[k] = (P[k] ** 2 + Q[k] ** 2) / v[i]
            v[j] = v[i] - 2 * (r[k] * P[k] + xr[k] * Q[k]) + (r[k] ** 2 + xr[k] ** 2) * ell[k]
    d = ell - ell0
    dp = np.zeros(net.n_nodes)
    dq = np.zeros(net.n_nodes)
    np.add.at(dp, net.line_dst, r * d)
    np.add.at(dq, net.line_dst, xr * d)
    if max(np.abs(dp).max(initial=0.0), np.abs(dq).max(initial=0.0)) > POLISH_TOL:
        return None
    if np.any(ell > model.ub[iL] + 1e-9) or np.any(v < model.lb[iv] - 1e-9) or np.any(v > model.ub[iv] + 1e-9):
        return None
    out = x.copy()
    out[iL] = ell
    out[iv] = v
    return out


def unpack(model: OPFModel, x, z, obj, iterations, solver="socp") -> DispatchResult:
    pb = model.problem
    net = pb.network
    base = net.base_mva * 1000.0
    idx = model.idx
    shed_p = np.zeros(net.n_nodes)
    shed_q = np.zeros(net.n_nodes)
    for k, col in idx["ps"].items():
        shed_p[k] = x[col] * base
        shed_q[k] = x[idx["qs"][k]] * base
    pi = -z[idx["pbal"]]
    mu = -z[idx["qbal"]]
    dlmp = pi.copy()
    for k, col in idx["ps"].items():
        cap_row = idx["cap"].get(col)
        if cap_row is not None:
            # the shedding cap is the load itself: fold its multiplier in
            dlmp[k] -= z[idx["n_zero"] + cap_row]
        _, qrow = idx["qshed"][k]
        if pb.load_p[k] > 0:
            # the reactive shedding ratio q/p also moves with the active load
            dlmp[k] += z[qrow] * shed_p[k] * pb.load_q[k] / pb.load_p[k] ** 2
    flow_p = x[idx["P"]] * base
    flow_q = x[idx["Q"]] * base
    ell = x[idx["l"]]
    v = x[idx["v"]]
    return DispatchResult(
        problem=pb,
        status="optimal",
        objective_rate=obj * net.base_mva,
        gen_p={u.name: x[idx["pg"][u.name]] * base for u in pb.units},
        gen_q={u.name: x[idx["qg"][u.name]] * base for u in pb.units},
        offer_p={o.agent: x[idx["po"][o.agent]] * base for o in pb.offers},
        shed_p=shed_p,
        shed_q=shed_q,
        v=v,
        flow_p=flow_p,
        flow_q=flow_q,
        sq_current=ell,
        pi=pi,
        mu=mu,
        dlmp=dlmp,
        iterations=iterations,
        solver=solver,
        primal=x,
        duals=z,
    )


def solve_socp(model: OPFModel, max_iter=MAX_ITER, polish=True) -> DispatchResult:
    x, z, obj, it = run_conic(model, max_iter)
    raw = unpack(model, x, z, obj, it)
    raw.raw_gap = _max_gap(raw)
    if not polish:
        return raw
    xp = polish_currents(model, x)
    if xp is None:
        return raw
    res = unpack(model, xp, z, obj, it)
    res.raw_gap = raw.raw_gap
    res.polished = True
    return res


def _max_gap(result):
    from .pricing import check_exactness

    return check_exactness(result)
