"""Pure-Python order-matching kernel (fallback twin of `_matching.pyx`).

Both implementations must stay operation-for-operation identical: the same
IEEE-754 arithmetic in the same order, so episode logs are bit-equal no
matter which backend was selected at import.
"""

from __future__ import annotations

import numpy as np


def match_orders(buy_price, buy_qty, buy_agent, sell_price, sell_qty, sell_agent):
    """Greedy walk over pre-sorted books.

    Buys must arrive sorted best-first (price desc, then priority), sells
    ascending. Each crossing pair trades min residual at the midpoint price;
    a pair whose agent codes coincide is skipped and the ask stays available
    to later bids.

    Returns (buy_idx, sell_idx, price, qty, buy_residual, sell_residual)
    as numpy arrays (int64 / float64).
    """
    nb = len(buy_price)
    ns = len(sell_price)
    bp = [float(x) for x in buy_price]
    ba = [int(x) for x in buy_agent]
    sp = [float(x) for x in sell_price]
    sa = [int(x) for x in sell_agent]
    resid_b = [float(x) for x in buy_qty]
    resid_s = [float(x) for x in sell_qty]

    out_bi: list[int] = []
    out_si: list[int] = []
    out_p: list[float] = []
    out_q: list[float] = []

    for i in range(nb):
        rb = resid_b[i]
        if rb <= 0.0:
            continue
        pb = bp[i]
        for j in range(ns):
            rs = resid_s[j]
            if rs <= 0.0:
                continue
            if sp[j] > pb:
                break
            if sa[j] == ba[i]:
                continue
            q = rb if rb < rs else rs
            out_bi.append(i)
            out_si.append(j)
            out_p.append((pb + sp[j]) / 2.0)
            out_q.append(q)
            rb -= q
            resid_s[j] = rs - q
            if rb <= 0.0:
                break
        resid_b[i] = rb

    return (
        np.asarray(out_bi, dtype=np.int64),
        np.asarray(out_si, dtype=np.int64),
        np.asarray(out_p, dtype=np.float64),
        np.asarray(out_q, dtype=np.float64),
        np.asarray(resid_b, dtype=np.float64),
        np.asarray(resid_s, dtype=np.float64),
    )
