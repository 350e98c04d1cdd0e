"""Plain-text dump of a conic OPF model and its solution.

Layout (tab separated, ``#`` starts a comment)::

    # gridmarket-opf-dump 1
    # problem <label> mode=<mode> vars=<n> rows=<m> cones=<soc count>
    [variables]
    name  lb  ub  cost  value
    [rows]
    name  cone  rhs  dual  terms
    ...

``terms`` is a space separated list of ``coef*varname``.  Rows use the
convention ``sum(terms) + s = rhs`` with ``s`` in the named cone; duals
are the solver's cone multipliers (``nan`` when no solution is attached).
Numbers are written with ``repr`` so a dump re-reads bit-exactly.
"""
from __future__ import annotations

import io

import numpy as np

from .socp import OPFModel


def _cone_labels(model: OPFModel):
    out = []
    for kind, size in model.cones:
        out += [kind] * size
    return out


def dump_model(model: OPFModel, result=None, stream=None) -> str:
    x = result.primal if result is not None and result.primal is not None else np.full(len(model.c), np.nan)
    z = result.duals if result is not None and result.duals is not None and result.solver == "socp" \
        else np.full(model.A.shape[0], np.nan)
    buf = io.StringIO()
    pb = model.problem
    buf.write("# gridmarket-opf-dump 1\n")
    buf.write(f"# problem {pb.label or '-'} mode={pb.mode} vars={len(model.c)} rows={model.A.shape[0]} "
              f"cones={model.n_cones}\n")
    buf.write("[variables]\n")
    for k, name in enumerate(model.var_names):
        buf.write(f"{name}\t{float(model.lb[k])!r}\t{float(model.ub[k])!r}\t{float(model.c[k])!r}\t{float(x[k])!r}\n")
    buf.write("[rows]\n")
    A = model.A.tocsr()
    cones = _cone_labels(model)
    for r, name in enumerate(model.row_names):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        terms = " ".join(f"{float(v)!r}*{model.var_names[c]}" for c, v in zip(A.indices[lo:hi], A.data[lo:hi]))
        buf.write(f"{name}\t{cones[r]}\t{float(model.b[r])!r}\t{float(z[r])!r}\t{terms}\n")
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def read_dump(text: str) -> dict:
    """Parse a dump back into ``{"variables": [...], "rows": [...]}``."""
    section = None
    out = {"variables": [], "rows": []}
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        if line in ("[variables]", "[rows]"):
            section = line[1:-1]
            continue
        parts = line.split("\t")
        if section == "variables":
            name, lo, hi, c, val = parts
            out["variables"].append((name, float(lo), float(hi), float(c), float(val)))
        elif section == "rows":
            name, cone, rhs, dual, terms = (parts + [""])[:5]
            coeffs = []
            for t in terms.split():
                coef, var = t.split("*", 1)
                coeffs.append((var, float(coef)))
            out["rows"].append((name, cone, float(rhs), float(dual), coeffs))
        else:
            raise ValueError(f"dump line outside a section: {line!r}")
    return out
