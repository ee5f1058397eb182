# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled frame simulator.

Mirrors :func:`coopharq.protocol.simulate_batch` operation for operation
(same enumeration order, same summation order, libm ``log2``) so both
backends return identical arrays for identical inputs.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2

cnp.import_array()

cdef enum:
    MAX_SOURCES = 16
    MAX_NODES = 64
    MAX_ROUNDS = 64


cdef inline void _sums(unsigned int u, const double* rates, const double* mi_rx,
                       double* lhs, double* rhs) noexcept nogil:
    cdef double a = 0.0, b = 0.0
    cdef int i = 0
    while u:
        if u & 1:
            a += rates[i]
            b += mi_rx[i]
        u >>= 1
        i += 1
    lhs[0] = a
    rhs[0] = b


cdef bint _mu_individual(int s, unsigned int undecoded, int rx, const double* rates,
                         const double* mi_rx, double alpha, int n_help,
                         const int* hnode, const unsigned int* hset) noexcept nogil:
    cdef unsigned int bit = 1u << s
    cdef unsigned int rest = undecoded & ~bit
    cdef unsigned int useful_set[MAX_ROUNDS]
    cdef double useful_w[MAX_ROUNDS]
    cdef int n_useful = 0, l, j
    cdef unsigned int interference, others, extra
    cdef double boost, lhs, rhs
    cdef bint violated
    for l in range(n_help):
        if hnode[l] != rx and (hset[l] & bit):
            useful_set[n_useful] = hset[l]
            useful_w[n_useful] = alpha * mi_rx[hnode[l]]
            n_useful += 1
    interference = rest
    while True:
        boost = 0.0
        for j in range(n_useful):
            if not (useful_set[j] & interference):
                boost += useful_w[j]
        others = rest & ~interference
        violated = False
        extra = others
        while True:
            _sums(extra | bit, rates, mi_rx, &lhs, &rhs)
            if lhs > rhs + boost:
                violated = True
                break
            if extra == 0:
                break
            extra = (extra - 1) & others
        if not violated:
            return False
        if interference == 0:
            break
        interference = (interference - 1) & rest
    return True


cdef bint _su_individual(int s, int rx, const double* rates, const double* mi_rx,
                         double alpha, int n_help, const int* hnode,
                         const int* hsrc) noexcept nogil:
    cdef double acc = mi_rx[s]
    cdef int l
    for l in range(n_help):
        if hnode[l] != rx and hsrc[l] == s:
            acc += alpha * mi_rx[hnode[l]]
    return rates[s] > acc


cdef bint _cc_individual(int s, int rx, const double* rates, const double* g_rx,
                         int n_help, const int* hnode, const int* hsrc) noexcept nogil:
    cdef double snr = g_rx[s]
    cdef int l
    for l in range(n_help):
        if hnode[l] != rx and hsrc[l] == s:
            snr += g_rx[hnode[l]]
    return rates[s] > log2(1.0 + snr)


cdef int _popcount(unsigned int x) noexcept nogil:
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


cdef void _frame(const double* gains, const double* uniforms, const double* rates,
                 int kind, double alpha, int max_rounds, int n_src, int n_rel,
                 int* t_out, unsigned int* dest_out) noexcept nogil:
    cdef int n_tx = n_src + n_rel
    cdef int n_nodes = n_tx + 1
    cdef int d = n_tx
    cdef double g[MAX_NODES * MAX_NODES]
    cdef double mi[MAX_NODES * MAX_NODES]
    cdef unsigned int dec[MAX_NODES]
    cdef unsigned int new_dec[MAX_NODES]
    cdef int hnode[MAX_ROUNDS]
    cdef unsigned int hset[MAX_ROUNDS]
    cdef int hsrc[MAX_ROUNDS]
    cdef unsigned int full = (1u << n_src) - 1u
    cdef unsigned int missing, missing_b, opts, m
    cdef int a, b, s, t = 0, node, helped, k, idx, i
    cdef double best_mi
    cdef bint out

    # row b holds every link pointing at node b
    for a in range(n_tx):
        for b in range(n_nodes):
            g[b * n_tx + a] = gains[a * n_nodes + b]
            mi[b * n_tx + a] = log2(1.0 + gains[a * n_nodes + b])

    for b in range(n_nodes):
        dec[b] = (1u << b) if b < n_src else 0u
    for b in range(n_nodes):
        for s in range(n_src):
            if s != b and rates[s] <= mi[b * n_tx + s]:
                dec[b] |= 1u << s

    while (full & ~dec[d]) and t < max_rounds:
        missing = full & ~dec[d]
        node = -1
        best_mi = 0.0
        for a in range(n_tx):
            if (dec[a] & missing) and (node < 0 or mi[d * n_tx + a] > best_mi):
                node = a
                best_mi = mi[d * n_tx + a]
        helped = -1
        if kind != 0:
            opts = dec[node] & missing
            k = _popcount(opts)
            idx = <int>(uniforms[t] * k)
            if idx > k - 1:
                idx = k - 1
            i = 0
            m = opts
            s = 0
            while m:
                if m & 1:
                    if i == idx:
                        helped = s
                        break
                    i += 1
                m >>= 1
                s += 1
        hnode[t] = node
        hset[t] = dec[node]
        hsrc[t] = helped
        t += 1

        for b in range(n_nodes):
            new_dec[b] = dec[b]
        for b in range(n_nodes):
            if b == node:
                continue
            missing_b = full & ~dec[b]
            if not missing_b:
                continue
            for s in range(n_src):
                if not (missing_b >> s) & 1u:
                    continue
                if kind == 0:
                    out = _mu_individual(s, missing_b, b, rates, &mi[b * n_tx], alpha,
                                         t, hnode, hset)
                elif kind == 1:
                    out = _su_individual(s, b, rates, &mi[b * n_tx], alpha, t, hnode, hsrc)
                else:
                    out = _cc_individual(s, b, rates, &g[b * n_tx], t, hnode, hsrc)
                if not out:
                    new_dec[b] |= 1u << s
        for b in range(n_nodes):
            dec[b] = new_dec[b]

    t_out[0] = t
    dest_out[0] = dec[d]


def simulate_batch(gains, uniforms, rates, int kind_code, double alpha, int max_rounds,
                   int n_sources, int n_relays):
    """Run many frames; returns ``(t_used, destination_set)`` int32 arrays."""
    cdef int n_tx = n_sources + n_relays
    cdef int n_nodes = n_tx + 1
    if n_sources < 1 or n_sources > MAX_SOURCES:
        raise ValueError(f"compiled kernel supports 1..{MAX_SOURCES} sources")
    if n_nodes > MAX_NODES or max_rounds > MAX_ROUNDS:
        raise ValueError("network or round budget exceeds compiled kernel limits")
    if kind_code not in (0, 1, 2):
        raise ValueError(f"unknown protocol code {kind_code}")
    cdef const double[:, :, ::1] gv = np.ascontiguousarray(gains, dtype=np.float64)
    cdef const double[:, ::1] uv = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(rates, dtype=np.float64)
    cdef Py_ssize_t n = gv.shape[0], f
    if gv.shape[1] != n_tx or gv.shape[2] != n_nodes:
        raise ValueError("gains shape does not match the network size")
    if rv.shape[0] != n_sources:
        raise ValueError("need one rate per source")
    if uv.shape[0] != n:
        raise ValueError("need one row of uniforms per frame")
    if kind_code != 0 and uv.shape[1] < max_rounds:
        raise ValueError("need one uniform per round")
    t_used = np.zeros(n, dtype=np.int32)
    dest = np.zeros(n, dtype=np.int32)
    cdef int[::1] tv = t_used
    cdef int[::1] dv = dest
    cdef unsigned int dmask
    cdef double dummy = 0.0
    cdef const double* up
    with nogil:
        for f in range(n):
            up = &uv[f, 0] if uv.shape[1] > 0 else &dummy
            _frame(&gv[f, 0, 0], up, &rv[0], kind_code, alpha, max_rounds,
                   n_sources, n_relays, &tv[f], &dmask)
            dv[f] = <int>dmask
    return t_used, dest
