"""Greedy best-ask / best-bid pairing over sorted books.

Both kernels take ask prices ascending and bid prices descending (with
their quantities) and return ``(ask_idx, bid_idx, qty)`` for every fill,
in fill order.  Pairing continues while the current ask is strictly below
the current bid.
"""
from __future__ import annotations

import numpy as np

from .._accel import njit, pick


@njit(cache=True)
def _greedy_loop(ap, aq, bp, bq):
    na, nb = ap.shape[0], bp.shape[0]
    ra = aq.copy()
    rb = bq.copy()
    cap = na + nb
    out_a = np.empty(cap, dtype=np.int64)
    out_b = np.empty(cap, dtype=np.int64)
    out_q = np.empty(cap, dtype=np.float64)
    i = 0
    j = 0
    n = 0
    while i < na and j < nb and ap[i] < bp[j]:
        q = min(ra[i], rb[j])
        out_a[n] = i
        out_b[n] = j
        out_q[n] = q
        n += 1
        ra[i] -= q
        rb[j] -= q
        if ra[i] <= 0.0:
            i += 1
        if rb[j] <= 0.0:
            j += 1
    return out_a[:n], out_b[:n], out_q[:n]


def _greedy_numpy(ap, aq, bp, bq):
    if ap.size == 0 or bp.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0)
    ca = np.cumsum(aq)
    cb = np.cumsum(bq)
    # fills are the segments between consecutive cumulative breakpoints
    cuts = np.union1d(ca, cb)
    cuts = cuts[cuts <= min(ca[-1], cb[-1])]
    lo = np.concatenate(([0.0], cuts[:-1]))
    qty = cuts - lo
    keep = qty > 0
    lo, qty = lo[keep], qty[keep]
    ia = np.searchsorted(ca, lo, side="right")
    ib = np.searchsorted(cb, lo, side="right")
    ok = ap[ia] < bp[ib]
    # asks rise and bids fall along the path, so crossing fails monotonically
    stop = int(np.argmin(ok)) if not ok.all() else ok.size
    return ia[:stop].astype(np.int64), ib[:stop].astype(np.int64), qty[:stop]


def greedy_match(ap, aq, bp, bq, use_numba=None):
    fn = pick(_greedy_loop, _greedy_numpy, use_numba)
    return fn(np.ascontiguousarray(ap, dtype=np.float64), np.ascontiguousarray(aq, dtype=np.float64),
              np.ascontiguousarray(bp, dtype=np.float64), np.ascontiguousarray(bq, dtype=np.float64))
