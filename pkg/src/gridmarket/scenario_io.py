"""Reading and writing scenario files.

Three plain-text formats:

Feeder file (``*.feeder``)
    Sectioned text.  ``[meta]`` holds ``key = value`` pairs (``name``,
    ``root``, ``base_kv`` in kV, ``base_mva`` in MVA).  ``[nodes]``,
    ``[lines]`` and ``[generators]`` are CSV blocks with a header row:

    * nodes: ``id, load_kw, load_kvar, v_min, v_max, role`` (voltages in p.u.,
      role one of none/prosumer/consumer)
    * lines: ``from, to`` then either ``r_ohm, x_ohm`` or ``r_pu, x_pu``,
      then ``flow_limit_kva`` and optional ``current_limit_pu2``
      (squared per-unit current; defaults to the squared per-unit rating)
    * generators: ``name, node, kind, p_min_kw, p_max_kw, q_min_kvar,
      q_max_kvar, cost`` (cost in $/MWh; grid-root units are priced at the
      upstream LMP and their cost column is ignored)

    ``#`` starts a comment.

Profile file (CSV)
    One row per source step.  ``hour`` is the step start in hours; series
    columns are ``load_mult``, ``pv_frac``, ``lmp`` ($/MWh), with optional
    per-node overrides ``load_mult:<node>`` and ``pv_frac:<node>``.  Values
    are held constant (step interpolation) over the simulation intervals
    that start inside a row's span.

Scenario config (JSON)
    ``feeder`` and ``profiles`` paths (relative to the config file), and the
    fields of :class:`~gridmarket.config.ScenarioConfig`.  Events accept
    ``start``/``duration`` in intervals or ``start_hour``/``duration_hours``.
    Zones map zone id to a node list or an ``"a-b"`` range string.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .config import UPSTREAM, OutageEvent, ScenarioConfig, StrategyParams
from .errors import ScenarioParseError
from .netmodel import (
    Generator,
    Line,
    Network,
    Node,
    Profiles,
    validate_network,
    validate_profiles,
)

DATA_DIR = Path(__file__).parent / "data"
SCENARIO_DIR = DATA_DIR / "scenarios"

_NODE_COLS = ("id", "load_kw", "load_kvar", "v_min", "v_max", "role")
_GEN_COLS = ("name", "node", "kind", "p_min_kw", "p_max_kw", "q_min_kvar", "q_max_kvar", "cost")


def _num(text, path, line, fld, cast=float):
    try:
        return cast(text)
    except (TypeError, ValueError):
        raise ScenarioParseError(f"expected a number, got {text!r}", path, line, fld) from None


def _split_sections(text, path):
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current in sections:
                raise ScenarioParseError(f"section [{current}] repeated", path, lineno)
            sections[current] = []
            continue
        if current is None:
            raise ScenarioParseError("content before first section header", path, lineno)
        sections[current].append((lineno, line))
    return sections


def _table(rows, path, section, required):
    if not rows:
        raise ScenarioParseError(f"section [{section}] is empty", path)
    head_line, head = rows[0]
    cols = [c.strip() for c in next(csv.reader([head]))]
    missing = [c for c in required if c not in cols]
    if missing:
        raise ScenarioParseError(f"[{section}] header lacks columns {missing}", path, head_line)
    out = []
    for lineno, line in rows[1:]:
        vals = [v.strip() for v in next(csv.reader([line]))]
        if len(vals) != len(cols):
            raise ScenarioParseError(f"[{section}] expected {len(cols)} fields, got {len(vals)}", path, lineno)
        out.append((lineno, dict(zip(cols, vals))))
    return cols, out


def parse_feeder(text: str, path="<feeder>", zones=None) -> Network:
    sections = _split_sections(text, path)
    for name in ("meta", "nodes", "lines"):
        if name not in sections:
            raise ScenarioParseError(f"missing section [{name}]", path)
    meta = {}
    for lineno, line in sections["meta"]:
        if "=" not in line:
            raise ScenarioParseError("expected 'key = value'", path, lineno)
        k, v = (s.strip() for s in line.split("=", 1))
        meta[k] = (lineno, v)
    for key in ("root", "base_kv", "base_mva"):
        if key not in meta:
            raise ScenarioParseError(f"[meta] lacks '{key}'", path)
    root = _num(meta["root"][1], path, meta["root"][0], "root", int)
    base_kv = _num(meta["base_kv"][1], path, meta["base_kv"][0], "base_kv")
    base_mva = _num(meta["base_mva"][1], path, meta["base_mva"][0], "base_mva")
    name = meta.get("name", (0, Path(str(path)).stem))[1]
    z_base = base_kv ** 2 / base_mva

    _, node_rows = _table(sections["nodes"], path, "nodes", _NODE_COLS)
    nodes = []
    for lineno, row in node_rows:
        nodes.append(Node(
            id=_num(row["id"], path, lineno, "id", int),
            load_p=_num(row["load_kw"], path, lineno, "load_kw"),
            load_q=_num(row["load_kvar"], path, lineno, "load_kvar"),
            v_min=_num(row["v_min"], path, lineno, "v_min"),
            v_max=_num(row["v_max"], path, lineno, "v_max"),
            agent_role=row["role"] or "none",
        ))

    cols, line_rows = _table(sections["lines"], path, "lines", ("from", "to", "flow_limit_kva"))
    if "r_pu" in cols and "x_pu" in cols:
        r_key, x_key, scale = "r_pu", "x_pu", 1.0
    elif "r_ohm" in cols and "x_ohm" in cols:
        r_key, x_key, scale = "r_ohm", "x_ohm", 1.0 / z_base
    else:
        raise ScenarioParseError("[lines] needs r_pu/x_pu or r_ohm/x_ohm columns", path, line_rows[0][0] - 1 if line_rows else None)
    lines = []
    for lineno, row in line_rows:
        flow = _num(row["flow_limit_kva"], path, lineno, "flow_limit_kva")
        cur = row.get("current_limit_pu2", "")
        cur = _num(cur, path, lineno, "current_limit_pu2") if cur else (flow / 1000.0 / base_mva) ** 2
        r = _num(row[r_key], path, lineno, r_key)
        x = _num(row[x_key], path, lineno, x_key)
        lines.append(Line(
            src=_num(row["from"], path, lineno, "from", int),
            dst=_num(row["to"], path, lineno, "to", int),
            r=r * scale if scale != 1.0 else r,
            x=x * scale if scale != 1.0 else x,
            flow_limit=flow,
            current_limit=cur,
        ))

    gens = []
    if "generators" in sections:
        _, gen_rows = _table(sections["generators"], path, "generators", _GEN_COLS)
        for lineno, row in gen_rows:
            gens.append(Generator(
                name=row["name"],
                node=_num(row["node"], path, lineno, "node", int),
                kind=row["kind"],
                p_min=_num(row["p_min_kw"], path, lineno, "p_min_kw"),
                p_max=_num(row["p_max_kw"], path, lineno, "p_max_kw"),
                q_min=_num(row["q_min_kvar"], path, lineno, "q_min_kvar"),
                q_max=_num(row["q_max_kvar"], path, lineno, "q_max_kvar"),
                cost=_num(row["cost"], path, lineno, "cost"),
            ))
    if zones is None:
        zones = {n.id: 1 for n in nodes}
    return Network(nodes, lines, root, base_kv, base_mva, gens, zones, name)


def serialize_feeder(network: Network) -> str:
    """Inverse of :func:`parse_feeder` (per-unit impedances, full precision)."""
    buf = io.StringIO()
    buf.write("[meta]\n")
    buf.write(f"name = {network.name}\nroot = {network.root}\n")
    buf.write(f"base_kv = {network.base_kv!r}\nbase_mva = {network.base_mva!r}\n\n[nodes]\n")
    buf.write(", ".join(_NODE_COLS) + "\n")
    for n in network.nodes:
        buf.write(f"{n.id}, {n.load_p!r}, {n.load_q!r}, {n.v_min!r}, {n.v_max!r}, {n.agent_role}\n")
    buf.write("\n[lines]\nfrom, to, r_pu, x_pu, flow_limit_kva, current_limit_pu2\n")
    for ln in network.lines:
        buf.write(f"{ln.src}, {ln.dst}, {ln.r!r}, {ln.x!r}, {ln.flow_limit!r}, {ln.current_limit!r}\n")
    if network.generators:
        buf.write("\n[generators]\n" + ", ".join(_GEN_COLS) + "\n")
        for g in network.generators:
            buf.write(f"{g.name}, {g.node}, {g.kind}, {g.p_min!r}, {g.p_max!r}, {g.q_min!r}, {g.q_max!r}, {g.cost!r}\n")
    return buf.getvalue()


def parse_zones(spec, path="<config>") -> dict:
    zones = {}
    for zid, members in spec.items():
        try:
            z = int(zid)
        except ValueError:
            raise ScenarioParseError(f"zone id {zid!r} is not an integer", path, field="zones") from None
        if isinstance(members, str):
            items = []
            for part in members.split(","):
                part = part.strip()
                if "-" in part:
                    a, b = part.split("-", 1)
                    items.extend(range(int(a), int(b) + 1))
                elif part:
                    items.append(int(part))
            members = items
        for nid in members:
            zones[int(nid)] = z
    return zones


def parse_profiles(text: str, network: Network, interval_minutes: float, horizon: int,
                   fit: float, voll: float, path="<profiles>") -> Profiles:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(k + 1, [c.strip() for c in r]) for k, r in enumerate(rows) if r and not r[0].strip().startswith("#")]
    if not rows:
        raise ScenarioParseError("empty profile file", path)
    head_line, head = rows[0]
    for need in ("hour", "load_mult", "pv_frac", "lmp"):
        if need not in head:
            raise ScenarioParseError(f"header lacks column '{need}'", path, head_line)
    data = []
    for lineno, r in rows[1:]:
        if len(r) != len(head):
            raise ScenarioParseError(f"expected {len(head)} fields, got {len(r)}", path, lineno)
        data.append([_num(v, path, lineno, c) for c, v in zip(head, r)])
    if not data:
        raise ScenarioParseError("no data rows", path)
    table = np.array(data)
    col = {c: table[:, k] for k, c in enumerate(head)}
    hours = col["hour"]
    if np.any(np.diff(hours) <= 0):
        raise ScenarioParseError("'hour' column must be strictly increasing", path, field="hour")
    starts = np.arange(horizon) * interval_minutes / 60.0
    if starts[0] < hours[0]:
        raise ScenarioParseError(f"profile starts at hour {hours[0]}, after the horizon start", path, field="hour")
    step = np.searchsorted(hours, starts + 1e-9, side="right") - 1
    span = (hours[-1] - hours[0]) + (hours[-1] - hours[-2] if len(hours) > 1 else 1.0)
    if starts[-1] >= hours[0] + span - 1e-9:
        raise ScenarioParseError(f"profile covers {span} h, horizon needs {horizon * interval_minutes / 60} h",
                                 path, field="hour")

    n = network.n_nodes
    load_mult = np.repeat(col["load_mult"][step][:, None], n, axis=1)
    for c in head:
        if c.startswith("load_mult:"):
            nid = int(c.split(":", 1)[1])
            if nid not in network.index:
                raise ScenarioParseError(f"column for unknown node {nid}", path, head_line, c)
            load_mult[:, network.index[nid]] = col[c][step]
    pv = {}
    for nd in network.nodes:
        if nd.agent_role == "prosumer":
            key = f"pv_frac:{nd.id}"
            pv[nd.id] = (col[key] if key in col else col["pv_frac"])[step].copy()
    for c in head:
        if c.startswith("pv_frac:"):
            nid = int(c.split(":", 1)[1])
            if nid not in pv:
                raise ScenarioParseError(f"PV column for non-prosumer node {nid}", path, head_line, c)
    return Profiles(load_mult, pv, col["lmp"][step].copy(), float(fit), float(voll), float(interval_minutes))


def parse_config(obj, path="<config>") -> ScenarioConfig:
    if not isinstance(obj, dict):
        raise ScenarioParseError("config must be a JSON object", path)
    minutes = float(obj.get("interval_minutes", 15))
    per_hour = 60.0 / minutes
    events = []
    for k, ev in enumerate(obj.get("events", [])):
        try:
            if "start_hour" in ev:
                start = int(round(float(ev["start_hour"]) * per_hour))
            else:
                start = int(ev["start"])
            if "duration_hours" in ev:
                dur = int(round(float(ev["duration_hours"]) * per_hour))
            else:
                dur = int(ev["duration"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioParseError(f"bad event #{k}: {exc}", path, field="events") from None
        events.append(OutageEvent(start, dur, str(ev.get("element", UPSTREAM))))
    strat = obj.get("strategy", {})
    try:
        strategy = StrategyParams(**{k: float(v) for k, v in strat.items()})
    except TypeError as exc:
        raise ScenarioParseError(str(exc), path, field="strategy") from None
    zones = parse_zones(obj["zones"], path) if "zones" in obj else None
    known = {"name", "feeder", "profiles", "interval_minutes", "horizon", "events", "p2p", "fit", "voll",
             "seed", "zones", "strategy", "vetting_margin", "solver", "root_voltage", "export_price"}
    unknown = set(obj) - known
    if unknown:
        raise ScenarioParseError(f"unknown keys {sorted(unknown)}", path)
    try:
        return ScenarioConfig(
            name=str(obj.get("name", Path(str(path)).stem)),
            horizon=int(obj.get("horizon", round(24 * per_hour))),
            interval_minutes=minutes,
            events=tuple(events),
            p2p_enabled=bool(obj.get("p2p", True)),
            fit=float(obj.get("fit", 20.0)),
            voll=float(obj.get("voll", 1000.0)),
            seed=int(obj.get("seed", 0)),
            zones=zones,
            strategy=strategy,
            vetting_margin=float(obj.get("vetting_margin", 0.02)),
            solver=str(obj.get("solver", "socp")),
            root_voltage=float(obj.get("root_voltage", 1.0)),
            export_price=float(obj.get("export_price", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(str(exc), path) from None


def resolve_scenario_path(spec) -> Path:
    """Accept a path to a config file or the name of a bundled scenario."""
    p = Path(spec)
    if p.is_file():
        return p
    bundled = SCENARIO_DIR / f"{spec}.json"
    if bundled.is_file():
        return bundled
    raise ScenarioParseError("scenario file not found", spec)


def list_bundled():
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))


def load_scenario(config_path, validate=True):
    """Load ``(network, profiles, config)`` from a scenario config file.

    Raises :class:`ScenarioParseError` for unreadable or malformed files and
    :class:`~gridmarket.errors.ValidationError` for invariant violations.
    """
    cfg_path = resolve_scenario_path(config_path)
    try:
        obj = json.loads(cfg_path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(exc.msg, cfg_path, exc.lineno) from None
    config = parse_config(obj, cfg_path)
    for key in ("feeder", "profiles"):
        if key not in obj:
            raise ScenarioParseError(f"missing '{key}' path", cfg_path, field=key)
    feeder_path = cfg_path.parent / obj["feeder"]
    profile_path = cfg_path.parent / obj["profiles"]
    for p in (feeder_path, profile_path):
        if not p.is_file():
            raise ScenarioParseError("file not found", p)
    network = parse_feeder(feeder_path.read_text(), feeder_path, zones=config.zones)
    profiles = parse_profiles(profile_path.read_text(), network, config.interval_minutes, config.horizon,
                              config.fit, config.voll, profile_path)
    if validate:
        validate_network(network)
        validate_profiles(profiles, network)
        config.validate()
    return network, profiles, config


def load_feeder(path, zones=None, validate=True) -> Network:
    path = Path(path)
    if not path.is_file():
        bundled = DATA_DIR / "feeders" / f"{path.name}"
        if not bundled.is_file():
            bundled = DATA_DIR / "feeders" / f"{path.name}.feeder"
        if not bundled.is_file():
            raise ScenarioParseError("file not found", path)
        path = bundled
    net = parse_feeder(path.read_text(), path, zones=zones)
    if validate:
        validate_network(net)
    return net
