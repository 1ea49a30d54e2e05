"""Compiled hot path: indexed binary heap, flat-array scheduler and the event loop.

Everything here works on plain arrays bundled in NamedTuples so numba can cache
the compiled code. Callers own validation; these functions assume valid input.
"""
import math
from typing import NamedTuple

import numpy as np
from numba import njit

# status codes returned by step_kernel / run_kernel
EVENT = 0
ABSORBED = 1
HORIZON = 2
LIMIT = 3
FULL = 4
STATE_COUNT = 5
ERROR = -1

# meta slots
SIZE = 0
EVENTS = 1
DENSE = 2
BAD_NODE = 3

NEG_TOL = 1e-9


class NetArrays(NamedTuple):
    out_ptr: np.ndarray  # (L, N + 1), offsets into out_idx / out_w
    out_idx: np.ndarray
    out_w: np.ndarray


class RateArrays(NamedTuple):
    node_rates: np.ndarray  # (M, M)
    inducer: np.ndarray  # (L,)
    node_exit: np.ndarray  # (M,)
    edge_exit: np.ndarray  # (L, M)
    # nonzero edge rates grouped by source state: layer, destination, rate
    etr_ptr: np.ndarray
    etr_layer: np.ndarray
    etr_to: np.ndarray
    etr_rate: np.ndarray
    # layers with a nonzero exit rate, grouped by state
    sl_ptr: np.ndarray
    sl_layer: np.ndarray


class SimArrays(NamedTuple):
    X: np.ndarray  # (N,) state per node
    W: np.ndarray  # (N, L) inducing weight per node and layer
    C: np.ndarray  # (N, L) number of inducing in-neighbors
    lam: np.ndarray  # (N,) total exit rate
    counts: np.ndarray  # (M,)
    heap_node: np.ndarray
    heap_time: np.ndarray
    pos: np.ndarray
    dense_time: np.ndarray
    meta: np.ndarray  # int64[4]: heap size, events, dense flag, offending node
    clock: np.ndarray  # float64[1]: current time
    scratch: np.ndarray  # (M,)
    touched: np.ndarray


# -- indexed binary heap keyed by (time, node) ----------------------------------

@njit(cache=True)
def precedes(t1, n1, t2, n2):
    return t1 < t2 or (t1 == t2 and n1 < n2)


@njit(cache=True)
def heap_sift_up(hn, ht, pos, i):
    node = hn[i]
    t = ht[i]
    while i > 0:
        parent = (i - 1) >> 1
        pn = hn[parent]
        pt = ht[parent]
        if precedes(t, node, pt, pn):
            hn[i] = pn
            ht[i] = pt
            pos[pn] = i
            i = parent
        else:
            break
    hn[i] = node
    ht[i] = t
    pos[node] = i


@njit(cache=True)
def heap_sift_down(hn, ht, pos, size, i):
    node = hn[i]
    t = ht[i]
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        cn = hn[child]
        ct = ht[child]
        right = child + 1
        if right < size and precedes(ht[right], hn[right], ct, cn):
            child = right
            cn = hn[right]
            ct = ht[right]
        if precedes(ct, cn, t, node):
            hn[i] = cn
            ht[i] = ct
            pos[cn] = i
            i = child
        else:
            break
    hn[i] = node
    ht[i] = t
    pos[node] = i


@njit(cache=True)
def heap_push(hn, ht, pos, meta, node, t):
    i = meta[SIZE]
    meta[SIZE] = i + 1
    hn[i] = node
    ht[i] = t
    pos[node] = i
    heap_sift_up(hn, ht, pos, i)


@njit(cache=True)
def heap_remove_at(hn, ht, pos, meta, i):
    last = meta[SIZE] - 1
    meta[SIZE] = last
    pos[hn[i]] = -1
    if i != last:
        hn[i] = hn[last]
        ht[i] = ht[last]
        pos[hn[i]] = i
        if i > 0 and precedes(ht[i], hn[i], ht[(i - 1) >> 1], hn[(i - 1) >> 1]):
            heap_sift_up(hn, ht, pos, i)
        else:
            heap_sift_down(hn, ht, pos, last, i)


@njit(cache=True)
def heap_pop(hn, ht, pos, meta):
    node = hn[0]
    t = ht[0]
    heap_remove_at(hn, ht, pos, meta, 0)
    return node, t


@njit(cache=True)
def heap_update(hn, ht, pos, meta, node, t):
    i = pos[node]
    old = ht[i]
    ht[i] = t
    if precedes(t, node, old, node):
        heap_sift_up(hn, ht, pos, i)
    else:
        heap_sift_down(hn, ht, pos, meta[SIZE], i)


@njit(cache=True)
def heap_remove(hn, ht, pos, meta, node):
    heap_remove_at(hn, ht, pos, meta, pos[node])


@njit(cache=True)
def heap_build(hn, ht, pos, meta, nodes, times):
    """Bulk-load an empty heap in O(n)."""
    n = nodes.shape[0]
    for k in range(n):
        hn[k] = nodes[k]
        ht[k] = times[k]
        pos[nodes[k]] = k
    meta[SIZE] = n
    for i in range(n // 2 - 1, -1, -1):
        heap_sift_down(hn, ht, pos, n, i)


@njit(cache=True)
def heap_check(hn, ht, pos, meta):
    """Index of the first heap-order or position-map violation, or -1."""
    size = meta[SIZE]
    for i in range(size):
        if pos[hn[i]] != i:
            return i
        if i > 0 and precedes(ht[i], hn[i], ht[(i - 1) >> 1], hn[(i - 1) >> 1]):
            return i
    count = 0
    for v in range(pos.shape[0]):
        if pos[v] >= 0:
            count += 1
    if count != size:
        return size
    return -1


# -- scheduler: heap (sparse mode) or flat time array (dense mode) -------------

@njit(cache=True)
def sched_set(st, node, t):
    if st.meta[DENSE]:
        st.dense_time[node] = t
    elif st.pos[node] >= 0:
        heap_update(st.heap_node, st.heap_time, st.pos, st.meta, node, t)
    else:
        heap_push(st.heap_node, st.heap_time, st.pos, st.meta, node, t)


@njit(cache=True)
def sched_discard(st, node):
    if st.meta[DENSE]:
        st.dense_time[node] = np.inf
    elif st.pos[node] >= 0:
        heap_remove(st.heap_node, st.heap_time, st.pos, st.meta, node)


@njit(cache=True)
def sched_peek(st):
    if st.meta[DENSE]:
        # argmin returns the first minimum, i.e. the smallest node id on ties
        i = np.argmin(st.dense_time)
        t = st.dense_time[i]
        if t == np.inf:
            return -1, np.inf
        return i, t
    if st.meta[SIZE] == 0:
        return -1, np.inf
    return st.heap_node[0], st.heap_time[0]


@njit(cache=True)
def sched_take_min(st, node):
    if st.meta[DENSE]:
        st.dense_time[node] = np.inf
    else:
        heap_pop(st.heap_node, st.heap_time, st.pos, st.meta)


# -- rates -------------------------------------------------------------------

@njit(cache=True)
def exp_wait(rng, lam):
    return -math.log(1.0 - rng.random()) / lam


@njit(cache=True)
def node_rate_k(rates, W, node, x):
    lam = rates.node_exit[x]
    for p in range(rates.sl_ptr[x], rates.sl_ptr[x + 1]):
        layer = rates.sl_layer[p]
        lam += rates.edge_exit[layer, x] * W[node, layer]
    return lam


@njit(cache=True)
def transition_rates_k(rates, W, node, x, out):
    m = out.shape[0]
    for s in range(m):
        out[s] = rates.node_rates[x, s]
    for p in range(rates.etr_ptr[x], rates.etr_ptr[x + 1]):
        out[rates.etr_to[p]] += rates.etr_rate[p] * W[node, rates.etr_layer[p]]


@njit(cache=True)
def cautious_update_k(net, rates, st, rng, node, old, new, t):
    """Propagate ``node``'s change old -> new to its out-neighbors.

    Only layers whose inducer is ``old`` or ``new`` are visited. Every
    out-neighbor's influence sum is kept current; only neighbors whose state
    has a nonzero edge-based exit on the layer get a new rate and a new
    absolute time. Returns the number of rescheduled entries (written to
    ``st.touched``) or -1 on a consistency failure.
    """
    n_touched = 0
    n_layers = rates.inducer.shape[0]
    for layer in range(n_layers):
        q = rates.inducer[layer]
        if q == new:
            d = 1
        elif q == old:
            d = -1
        else:
            continue
        for p in range(net.out_ptr[layer, node], net.out_ptr[layer, node + 1]):
            nb = net.out_idx[p]
            w = net.out_w[p]
            c = st.C[nb, layer] + d
            st.C[nb, layer] = c
            if c == 0:
                st.W[nb, layer] = 0.0
            else:
                wv = st.W[nb, layer] + d * w
                if wv < 0.0:
                    if wv < -NEG_TOL:
                        st.meta[BAD_NODE] = nb
                        return -1
                    wv = 0.0
                st.W[nb, layer] = wv
            xn = st.X[nb]
            be = rates.edge_exit[layer, xn]
            if be == 0.0:
                continue
            if c == 0:
                # the layer's influence vanished: rebuild so the rate can reach exactly zero
                lam_n = node_rate_k(rates, st.W, nb, xn)
            else:
                lam_n = st.lam[nb] + d * w * be
                if lam_n < 0.0:
                    if lam_n < -NEG_TOL:
                        st.meta[BAD_NODE] = nb
                        return -1
                    lam_n = 0.0
            st.lam[nb] = lam_n
            st.touched[n_touched] = nb
            n_touched += 1
            if lam_n > 0.0:
                sched_set(st, nb, t + exp_wait(rng, lam_n))
            else:
                sched_discard(st, nb)
    return n_touched


@njit(cache=True)
def step_kernel(net, rates, st, rng, horizon):
    """Advance one event. Returns ``(status, node, old, new, time)``."""
    node, t = sched_peek(st)
    if node < 0:
        return ABSORBED, -1, -1, -1, st.clock[0]
    if t > horizon:
        return HORIZON, -1, -1, -1, st.clock[0]
    sched_take_min(st, node)
    st.clock[0] = t
    x = st.X[node]
    out = st.scratch
    transition_rates_k(rates, st.W, node, x, out)
    total = 0.0
    for s in range(out.shape[0]):
        total += out[s]
    if not total > 0.0:
        st.meta[BAD_NODE] = node
        return ERROR, node, x, -1, t
    target = rng.random() * total
    acc = 0.0
    new = -1
    for s in range(out.shape[0]):
        r = out[s]
        if r > 0.0:
            acc += r
            new = s
            if target < acc:
                break
    st.X[node] = new
    st.counts[x] -= 1
    st.counts[new] += 1
    lam_new = node_rate_k(rates, st.W, node, new)
    st.lam[node] = lam_new
    if lam_new > 0.0:
        sched_set(st, node, t + exp_wait(rng, lam_new))
    if cautious_update_k(net, rates, st, rng, node, x, new, t) < 0:
        return ERROR, node, x, new, t
    st.meta[EVENTS] += 1
    return EVENT, node, x, new, t


@njit(cache=True)
def run_kernel(net, rates, st, rng, horizon, event_limit, stop_state, stop_threshold,
               buf_t, buf_node, buf_from, buf_to, filled):
    """Loop ``step_kernel`` until a stop condition, the event limit or a full buffer."""
    while True:
        if st.meta[EVENTS] >= event_limit:
            return LIMIT, filled
        if filled >= buf_t.shape[0]:
            return FULL, filled
        status, node, old, new, t = step_kernel(net, rates, st, rng, horizon)
        if status != EVENT:
            return status, filled
        buf_t[filled] = t
        buf_node[filled] = node
        buf_from[filled] = old
        buf_to[filled] = new
        filled += 1
        if stop_state >= 0 and st.counts[stop_state] == stop_threshold:
            return STATE_COUNT, filled
