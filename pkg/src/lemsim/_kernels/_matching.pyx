# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled order-matching kernel.

Must stay operation-for-operation identical to `matching_py.match_orders`
(same IEEE-754 arithmetic in the same order) so both backends produce
bit-equal trade logs.
"""

import numpy as np


def match_orders(buy_price, buy_qty, buy_agent, sell_price, sell_qty, sell_agent):
    """Greedy walk over pre-sorted books; see the pure-Python twin for docs."""
    cdef double[::1] bp = np.ascontiguousarray(buy_price, dtype=np.float64)
    cdef double[::1] sp = np.ascontiguousarray(sell_price, dtype=np.float64)
    cdef long long[::1] ba = np.ascontiguousarray(buy_agent, dtype=np.int64)
    cdef long long[::1] sa = np.ascontiguousarray(sell_agent, dtype=np.int64)

    resid_b_arr = np.array(buy_qty, dtype=np.float64, copy=True)
    resid_s_arr = np.array(sell_qty, dtype=np.float64, copy=True)
    cdef double[::1] resid_b = resid_b_arr
    cdef double[::1] resid_s = resid_s_arr

    cdef Py_ssize_t nb = bp.shape[0]
    cdef Py_ssize_t ns = sp.shape[0]
    cdef Py_ssize_t cap = nb + ns

    out_bi_arr = np.empty(cap, dtype=np.int64)
    out_si_arr = np.empty(cap, dtype=np.int64)
    out_p_arr = np.empty(cap, dtype=np.float64)
    out_q_arr = np.empty(cap, dtype=np.float64)
    cdef long long[::1] out_bi = out_bi_arr
    cdef long long[::1] out_si = out_si_arr
    cdef double[::1] out_p = out_p_arr
    cdef double[::1] out_q = out_q_arr

    cdef Py_ssize_t i, j, k = 0
    cdef double rb, rs, pb, q

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
            out_bi[k] = i
            out_si[k] = j
            out_p[k] = (pb + sp[j]) / 2.0
            out_q[k] = q
            k += 1
            rb -= q
            resid_s[j] = rs - q
            if rb <= 0.0:
                break
        resid_b[i] = rb

    return (
        out_bi_arr[:k].copy(),
        out_si_arr[:k].copy(),
        out_p_arr[:k].copy(),
        out_q_arr[:k].copy(),
        resid_b_arr,
        resid_s_arr,
    )
