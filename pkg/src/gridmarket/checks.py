"""Invariant battery run by ``gridmarket check`` and ``run --check``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispatch import ISLANDED, DispatchProblem, dlmp_fd_oracle, solve
from .market import payoffs
from .simkernel import _interval_inputs, _units, apply_events, run_simulation

BUDGET_TOL = 1e-9
GAP_TOL = 1e-6
ENERGY_TOL = 1e-6
FD_STEP_KW = 0.1


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _check(name, ok, detail):
    return CheckResult(name, bool(ok), detail)


def record_checks(records) -> list:
    out = []
    bb = max((abs(r.budget) for r in records), default=0.0)
    out.append(_check("budget balance", bb <= BUDGET_TOL, f"max |auctioneer net| = {bb:.3g} $"))
    worst = 0.0
    for r in records:
        if r.outcome is not None:
            sw, bw, _ = payoffs(r.outcome)
            worst = min([worst] + list(sw.values()) + list(bw.values()))
    out.append(_check("individual rationality", worst >= 0.0, f"min payoff = {worst:.3g}"))
    gaps = [r.cone_gap for r in records if not np.isnan(r.cone_gap)]
    g = max(gaps, default=0.0)
    out.append(_check("cone exactness", g <= GAP_TOL, f"max relative gap = {g:.3g}"))
    e = max((abs(r.energy_residual) for r in records), default=0.0)
    out.append(_check("energy accounting", e <= ENERGY_TOL, f"max residual = {e:.3g} p.u."))
    bad = [r.t for r in records if not (0.0 <= r.ri <= 100.0) or abs(r.served + r.shed - r.total_load) > 1e-6]
    out.append(_check("served + shed = load, RI in [0, 100]", not bad, f"violations at {bad[:5]}" if bad else "ok"))
    return out


def fd_oracle_check(network, profiles, config, sample: int, seed=None) -> CheckResult:
    """Compare dual prices with finite differences at sampled (interval, node) pairs."""
    if sample <= 0:
        return _check("DLMP vs finite difference", True, "skipped")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    ts = sorted({0, config.horizon - 1} | {ev.start for ev in config.events})
    worst, where = 0.0, None
    for t in ts:
        state = apply_events(config, t, network)
        iv = _interval_inputs(network, profiles, t, state)
        pb = DispatchProblem(network, iv.net_p, iv.net_q, _units(network, state.mode, profiles.lmp[t], config, state),
                             config.voll, state.mode, fixed_injection=iv.surplus if state.mode != ISLANDED else None,
                             root_voltage=config.root_voltage, label=f"t={t} fd")
        res = solve(pb, config.solver)
        nodes = rng.choice(network.node_ids, size=min(sample, network.n_nodes), replace=False)
        for nid in sorted(int(n) for n in nodes):
            fd = dlmp_fd_oracle(pb, nid, FD_STEP_KW, solve=lambda p: solve(p, config.solver))
            dual = res.dlmp[network.index[nid]]
            ratio = abs(fd - dual) / max(1e-3 * abs(fd), 0.01)
            if ratio > worst:
                worst, where = ratio, (t, nid, dual, fd)
    detail = f"worst error/tolerance = {worst:.3g}"
    if where:
        detail += f" at t={where[0]} node {where[1]} (dual {where[2]:.6g}, fd {where[3]:.6g})"
    return _check("DLMP vs finite difference", worst <= 1.0, detail)


def ri_monotonicity(with_p2p, without_p2p) -> CheckResult:
    bad = [a.t for a, b in zip(with_p2p, without_p2p) if a.ri < b.ri - 1e-9]
    return _check("RI with P2P >= RI without", not bad, f"violations at {bad[:5]}" if bad else "ok")


def run_checks(network, profiles, config, records=None, fd_sample=3) -> list:
    with_p2p = config.with_p2p(True)
    if records is None or not config.p2p_enabled:
        records = run_simulation(network, profiles, with_p2p)
    out = record_checks(records)
    out.append(fd_oracle_check(network, profiles, config, fd_sample))
    without = run_simulation(network, profiles, config.with_p2p(False))
    out.append(ri_monotonicity(records, without))
    return out
