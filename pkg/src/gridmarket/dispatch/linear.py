"""Linearised DistFlow (LinDistFlow) OPF solved as an LP.

Same decision variables as the conic model minus the squared currents:
losses are dropped, the voltage drop is ``v_j = v_i - 2(r P + x Q)`` and
each line's apparent-power rating becomes an octagon of linear cuts on
``(P, Q)``.  Duals come straight from the LP, which makes this a useful
cross-check of the conic prices on loss-free cases.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..errors import InfeasibleError, NonConvergenceError, NumericalFailureError
from .model import DispatchProblem, DispatchResult

MAX_ITER = 10_000


def solve_lp(problem: DispatchProblem) -> DispatchResult:
    problem.validate()
    net = problem.network
    base = net.base_mva * 1000.0
    N, L = net.n_nodes, net.n_lines
    r, x = net.r, net.x
    label = problem.label or "dispatch"

    lb, ub, cost = [], [], []

    def var(lo=-np.inf, hi=np.inf, c=0.0):
        lb.append(lo)
        ub.append(hi)
        cost.append(c)
        return len(lb) - 1

    iP = [var() for _ in range(L)]
    iQ = [var() for _ in range(L)]
    iv = []
    for nd in net.nodes:
        if nd.id == net.root:
            iv.append(var(problem.root_voltage ** 2, problem.root_voltage ** 2))
        else:
            iv.append(var(nd.v_min ** 2, nd.v_max ** 2))
    ipg = {u.name: var(u.p_min / base, u.p_max / base, u.cost) for u in problem.units}
    iqg = {u.name: var(u.q_min / base, u.q_max / base) for u in problem.units}
    ipo = {o.agent: var(0.0, o.quantity / base, o.price) for o in problem.offers}
    sheddable = problem.sheddable
    ips, iqs = {}, {}
    for k in range(N):
        if sheddable[k] > 0:
            ips[k] = var(0.0, sheddable[k] / base, problem.voll)
            iqs[k] = var()

    eq_r, eq_c, eq_v, beq = [], [], [], []

    def eq(terms, rhs):
        row = len(beq)
        for col, val in terms:
            eq_r.append(row)
            eq_c.append(col)
            eq_v.append(val)
        beq.append(rhs)
        return row

    p_terms = [[] for _ in range(N)]
    q_terms = [[] for _ in range(N)]
    for k in range(L):
        i, j = net.line_src[k], net.line_dst[k]
        p_terms[j].append((iP[k], 1.0))
        q_terms[j].append((iQ[k], 1.0))
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
    pbal = [eq(p_terms[k], (problem.load_p[k] - problem.fixed_injection[k]) / base) for k in range(N)]
    qbal = [eq(q_terms[k], problem.load_q[k] / base) for k in range(N)]
    for k in range(L):
        i, j = net.line_src[k], net.line_dst[k]
        eq([(iv[j], 1.0), (iv[i], -1.0), (iP[k], 2 * r[k]), (iQ[k], 2 * x[k])], 0.0)
    qshed = {}
    for k in ips:
        ratio = problem.load_q[k] / problem.load_p[k] if problem.load_p[k] > 0 else 0.0
        qshed[k] = eq([(iqs[k], 1.0), (ips[k], -ratio)], 0.0)

    # octagonal inner approximation of P^2 + Q^2 <= S^2
    ub_r, ub_c, ub_v, bub = [], [], [], []
    c8 = np.cos(np.pi / 8)
    dirs = [(np.cos(a), np.sin(a)) for a in np.arange(8) * np.pi / 4]
    for k, ln in enumerate(net.lines):
        s = ln.flow_limit / base
        for a, b in dirs:
            row = len(bub)
            ub_r += [row, row]
            ub_c += [iP[k], iQ[k]]
            ub_v += [a, b]
            bub.append(s * c8)

    n = len(lb)
    A_eq = sp.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(beq), n))
    A_ub = sp.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(bub), n))
    res = linprog(np.array(cost), A_ub=A_ub, b_ub=np.array(bub), A_eq=A_eq, b_eq=np.array(beq),
                  bounds=list(zip(lb, ub)), method="highs", options={"maxiter": MAX_ITER})
    if res.status == 2:
        raise InfeasibleError(f"{label}: linearised OPF infeasible ({res.message})")
    if res.status == 1:
        raise NonConvergenceError(f"{label}: LP iteration limit reached")
    if res.status != 0:
        raise NumericalFailureError(f"{label}: LP failed ({res.message})")

    xs = res.x
    y = res.eqlin.marginals
    yu = res.upper.marginals
    shed_p = np.zeros(N)
    shed_q = np.zeros(N)
    for k, col in ips.items():
        shed_p[k] = xs[col] * base
        shed_q[k] = xs[iqs[k]] * base
    pi = y[pbal].copy()
    mu = y[qbal].copy()
    dlmp = pi.copy()
    for k, col in ips.items():
        dlmp[k] += yu[col]
        if problem.load_p[k] > 0:
            dlmp[k] -= y[qshed[k]] * shed_p[k] * problem.load_q[k] / problem.load_p[k] ** 2
    return DispatchResult(
        problem=problem,
        status="optimal",
        objective_rate=float(res.fun) * net.base_mva,
        gen_p={u.name: xs[ipg[u.name]] * base for u in problem.units},
        gen_q={u.name: xs[iqg[u.name]] * base for u in problem.units},
        offer_p={o.agent: xs[ipo[o.agent]] * base for o in problem.offers},
        shed_p=shed_p,
        shed_q=shed_q,
        v=xs[iv],
        flow_p=xs[iP] * base,
        flow_q=xs[iQ] * base,
        sq_current=np.zeros(L),
        pi=pi,
        mu=mu,
        dlmp=dlmp,
        iterations=int(res.nit),
        solver="lp",
        primal=xs,
        duals=y,
    )
