"""Branch-flow OPF with load shedding and dual-based nodal prices."""
from __future__ import annotations

from .linear import solve_lp
from .model import GRID_CONNECTED, ISLANDED, DispatchProblem, DispatchResult, Offer, Unit, units_for
from .pricing import check_exactness, cone_gaps, dlmp_fd_oracle, extract_dlmp
from .socp import OPFModel, build_opf, solve_socp

METHODS = ("socp", "lp")


def solve(model, method: str = "socp") -> DispatchResult:
    """Solve a :class:`DispatchProblem` (or a prebuilt conic model).

    ``method`` is ``"socp"`` (relaxed branch flow, the reference) or
    ``"lp"`` (linearised DistFlow fallback).
    """
    if method not in METHODS:
        raise ValueError(f"unknown solver method {method!r}; expected one of {METHODS}")
    if isinstance(model, OPFModel):
        if method != "socp":
            raise ValueError("a prebuilt conic model can only be solved with method='socp'")
        return solve_socp(model)
    if method == "lp":
        return solve_lp(model)
    return solve_socp(build_opf(model))


__all__ = [
    "GRID_CONNECTED", "ISLANDED", "DispatchProblem", "DispatchResult", "Offer", "Unit", "units_for",
    "OPFModel", "build_opf", "solve", "solve_socp", "solve_lp", "extract_dlmp", "check_exactness",
    "cone_gaps", "dlmp_fd_oracle",
]
