"""Report files for a simulation run.

All tables are CSV with a header row; floats are written with ``repr`` so
that re-reading them gives back the exact values.

``intervals.csv``
    One row per interval: ``t, hour, mode, total_load_kw, served_kw,
    shed_kw, ri_pct, atp, n_matches, n_blocked, traded_kw, surplus_kw,
    deficit_kw, fit_credit_usd, dlmp_debit_usd, p2p_cash_usd, budget_usd,
    welfare, generation_kw, losses_kw, cone_gap, energy_residual_pu,
    dlmp_min, dlmp_mean, dlmp_max``.  ``welfare`` is in kW*$/MWh,
    ``atp`` is empty when nothing traded.
``dlmp.csv``
    ``t`` then one column per node id ($/MWh).
``ri.csv`` / ``atp.csv``
    ``t, hour, value`` series.
``orders.csv`` / ``matches.csv`` / ``vetting.csv``
    Order book, match ledger and vetting report over all intervals
    (only written when P2P is enabled).
``summary.json``
    Scenario id, config echo and summary statistics, all of which can be
    recomputed from ``intervals.csv`` with :func:`summarize`.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path

from .market.ledger import MATCH_COLUMNS, ORDER_COLUMNS, match_rows, order_rows

INTERVAL_COLUMNS = ["t", "hour", "mode", "total_load_kw", "served_kw", "shed_kw", "ri_pct", "atp", "n_matches",
                    "n_blocked", "traded_kw", "surplus_kw", "deficit_kw", "fit_credit_usd", "dlmp_debit_usd",
                    "p2p_cash_usd", "budget_usd", "welfare", "generation_kw", "losses_kw", "cone_gap",
                    "energy_residual_pu", "dlmp_min", "dlmp_mean", "dlmp_max"]
VETTING_COLUMNS = ["interval", "seller", "buyer", "quantity", "status", "reason", "binding", "margin_used"]
_INT_COLUMNS = {"t", "n_matches", "n_blocked"}
_STR_COLUMNS = {"mode"}


def _f(x):
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def interval_row(rec, interval_minutes):
    d = rec.dlmp
    return [rec.t, repr(rec.t * interval_minutes / 60.0), rec.mode, _f(rec.total_load), _f(rec.served),
            _f(rec.shed), _f(rec.ri), _f(rec.atp), rec.n_matches, rec.n_blocked, _f(rec.traded), _f(rec.surplus),
            _f(rec.deficit), _f(rec.fit_credit), _f(rec.dlmp_debit), _f(rec.p2p_cash), _f(rec.budget),
            _f(rec.welfare), _f(rec.generation), _f(rec.losses), _f(rec.cone_gap), _f(rec.energy_residual),
            _f(d.min()), _f(sum(d.tolist()) / len(d)), _f(d.max())]


def summarize(rows) -> dict:
    """Summary statistics from interval-table rows (dicts of parsed values)."""
    ri = [r["ri_pct"] for r in rows]
    credit = sum(r["fit_credit_usd"] for r in rows)
    debit = sum(r["dlmp_debit_usd"] for r in rows)
    atps = [r["atp"] for r in rows if not math.isnan(r["atp"])]
    return {
        "intervals": len(rows),
        "mean_ri": sum(ri) / len(ri) if ri else float("nan"),
        "min_ri": min(ri) if ri else float("nan"),
        "total_welfare": sum(r["welfare"] for r in rows),
        "total_fit_credit_usd": credit,
        "total_dlmp_debit_usd": debit,
        "total_grid_settlements_usd": credit + debit,
        "total_shed_kwh": sum(r["shed_kw"] for r in rows) * _hours(rows),
        "matched_intervals": len(atps),
        "total_matches": sum(r["n_matches"] for r in rows),
        "max_budget_imbalance_usd": max((abs(r["budget_usd"]) for r in rows), default=0.0),
    }


def _hours(rows):
    if len(rows) < 2:
        return 0.25
    return rows[1]["hour"] - rows[0]["hour"]


def parse_interval_table(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for k, v in raw.items():
                if k in _INT_COLUMNS:
                    row[k] = int(v)
                elif k in _STR_COLUMNS:
                    row[k] = v
                else:
                    row[k] = float(v) if v != "" else float("nan")
            out.append(row)
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _jsonable(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def config_echo(config) -> dict:
    d = asdict(config)
    d["events"] = [asdict(e) for e in config.events]
    return d


def write_run(out_dir, records, config, network, scenario_id=None) -> dict:
    """Write every report file for one run; returns the summary dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mins = config.interval_minutes
    irows = [interval_row(r, mins) for r in records]
    _write_csv(out / "intervals.csv", INTERVAL_COLUMNS, irows)
    _write_csv(out / "dlmp.csv", ["t"] + [str(n) for n in network.node_ids],
               [[r.t] + [repr(float(x)) for x in r.dlmp] for r in records])
    _write_csv(out / "ri.csv", ["t", "hour", "ri_pct"], [[r.t, repr(r.t * mins / 60.0), _f(r.ri)] for r in records])
    _write_csv(out / "atp.csv", ["t", "hour", "atp"], [[r.t, repr(r.t * mins / 60.0), _f(r.atp)] for r in records])
    if config.p2p_enabled:
        orders, matches, vet = [], [], []
        for r in records:
            if r.outcome is None:
                continue
            orders += list(order_rows(r.outcome.orders))
            matches += list(match_rows(r.t, r.outcome.matches))
            vet += [[r.t, d.seller, d.buyer, repr(d.quantity), d.status, d.reason, d.binding, repr(d.margin_used)]
                    for d in r.vetting]
        _write_csv(out / "orders.csv", ORDER_COLUMNS, orders)
        _write_csv(out / "matches.csv", MATCH_COLUMNS, matches)
        _write_csv(out / "vetting.csv", VETTING_COLUMNS, vet)
    summary = summarize(parse_interval_table(out / "intervals.csv"))
    doc = {"scenario": scenario_id or config.name, "config": config_echo(config), "summary": summary}
    (out / "summary.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return summary


COMPARISON_COLUMNS = ["t", "mode", "ri_with", "ri_without", "ri_delta", "atp_with", "dlmp_mean_with",
                      "dlmp_mean_without"]


def write_comparison(path, rows):
    _write_csv(path, COMPARISON_COLUMNS,
               [[r.t, r.mode, _f(r.ri_with), _f(r.ri_without), _f(r.ri_delta), _f(r.atp_with),
                 _f(r.dlmp_with_mean), _f(r.dlmp_without_mean)] for r in rows])
