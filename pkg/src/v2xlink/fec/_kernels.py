"""Compiled inner loops: Viterbi add-compare-select and max-log-MAP recursions."""

import numpy as np
from numba import njit

NEG = -1.0e30


@njit(cache=True)
def viterbi_forward(llr, signs, init_metric):
    """Run the 64-state add-compare-select over ``llr`` (steps x n_out).

    ``signs[s, u, j]`` is +1/-1 for coded bit j = 0/1 leaving state s on
    input u.  Survivor decisions store the dropped register bit; ties keep
    the lower-index predecessor.
    """
    n_steps, n_out = llr.shape
    metric = init_metric.copy()
    new = np.empty(64)
    decisions = np.empty((n_steps, 64), dtype=np.uint8)
    for t in range(n_steps):
        best = NEG
        for ns in range(64):
            u = ns >> 5
            p0 = (ns & 31) << 1
            p1 = p0 | 1
            m0 = metric[p0]
            m1 = metric[p1]
            for j in range(n_out):
                m0 += signs[p0, u, j] * llr[t, j]
                m1 += signs[p1, u, j] * llr[t, j]
            if m1 > m0:
                new[ns] = m1
                decisions[t, ns] = 1
            else:
                new[ns] = m0
                decisions[t, ns] = 0
            if new[ns] > best:
                best = new[ns]
        for s in range(64):
            metric[s] = new[s] - best
    return decisions, metric


@njit(cache=True)
def viterbi_traceback(decisions, end_state):
    n_steps = decisions.shape[0]
    bits = np.empty(n_steps, dtype=np.int8)
    s = end_state
    for t in range(n_steps - 1, -1, -1):
        b = decisions[t, s]
        bits[t] = s >> 5
        s = ((s & 31) << 1) | b
    return bits


@njit(cache=True)
def rsc_maxlog(l_sys, l_par, l_apriori, next_state, parity, n_info):
    """Max-log-MAP for an 8-state RSC terminated in state 0.

    ``l_sys``/``l_par`` have n_info + 3 entries (info then tail); the tail
    steps only follow the branch that drives the register to zero, which is
    encoded by input value ``u`` equal to the feedback bit.  Returns the
    a-posteriori LLR of the information bits.
    """
    n = l_sys.size
    alpha = np.full((n + 1, 8), NEG)
    alpha[0, 0] = 0.0
    gam = np.empty((n, 8, 2))
    for t in range(n):
        la = l_apriori[t] if t < n_info else 0.0
        for s in range(8):
            for u in range(2):
                su = 1.0 - 2.0 * u
                sp = 1.0 - 2.0 * parity[s, u]
                gam[t, s, u] = 0.5 * (su * (l_sys[t] + la) + sp * l_par[t])
    for t in range(n):
        tail = t >= n_info
        for s in range(8):
            a = alpha[t, s]
            if a <= NEG:
                continue
            for u in range(2):
                if tail and (next_state[s, u] & 4) != 0:
                    continue
                ns = next_state[s, u]
                v = a + gam[t, s, u]
                if v > alpha[t + 1, ns]:
                    alpha[t + 1, ns] = v
        mx = NEG
        for s in range(8):
            if alpha[t + 1, s] > mx:
                mx = alpha[t + 1, s]
        for s in range(8):
            if alpha[t + 1, s] > NEG:
                alpha[t + 1, s] -= mx
    beta = np.full(8, NEG)
    beta[0] = 0.0
    prev = np.empty(8)
    out = np.empty(n_info)
    for t in range(n - 1, -1, -1):
        tail = t >= n_info
        best0 = NEG
        best1 = NEG
        for s in range(8):
            prev[s] = NEG
        for s in range(8):
            for u in range(2):
                ns = next_state[s, u]
                if tail and (ns & 4) != 0:
                    continue
                b = beta[ns]
                if b <= NEG:
                    continue
                v = gam[t, s, u] + b
                if v > prev[s]:
                    prev[s] = v
                if t < n_info and alpha[t, s] > NEG:
                    m = alpha[t, s] + v
                    if u == 0:
                        if m > best0:
                            best0 = m
                    elif m > best1:
                        best1 = m
        mx = NEG
        for s in range(8):
            if prev[s] > mx:
                mx = prev[s]
        for s in range(8):
            beta[s] = prev[s] - mx if prev[s] > NEG else NEG
        if t < n_info:
            out[t] = best0 - best1
    return out
