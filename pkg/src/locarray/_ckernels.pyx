# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np

from libc.stdint cimport int64_t, uint8_t, uint64_t
from libcpp.vector cimport vector


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int64_t _xor_count(const uint64_t[:, ::1] bits, Py_ssize_t a, Py_ssize_t b,
                               Py_ssize_t words) noexcept nogil:
    cdef int64_t s = 0
    cdef Py_ssize_t w
    for w in range(words):
        s += __builtin_popcountll(bits[a, w] ^ bits[b, w])
    return s


cdef inline int64_t _count_below(const uint64_t[:, ::1] bits, Py_ssize_t a, int64_t m,
                                 Py_ssize_t words) noexcept nogil:
    # members of row-set a with index < m
    cdef int64_t s = 0
    cdef Py_ssize_t w
    cdef Py_ssize_t full = m >> 6
    if full > words:
        full = words
    for w in range(full):
        s += __builtin_popcountll(bits[a, w])
    if full < words and (m & 63):
        s += __builtin_popcountll(bits[a, full] & ((<uint64_t>1 << (m & 63)) - 1))
    return s


def symdiff_sorted(a, b):
    cdef const int64_t[::1] x = np.ascontiguousarray(a, dtype=np.int64)
    cdef const int64_t[::1] y = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t i = 0, j = 0, na = x.shape[0], nb = y.shape[0]
    cdef int64_t count = 0
    with nogil:
        while i < na and j < nb:
            if x[i] == y[j]:
                i += 1
                j += 1
            elif x[i] < y[j]:
                count += 1
                i += 1
            else:
                count += 1
                j += 1
    return count + (na - i) + (nb - j)


def scan_pairs(const uint64_t[:, ::1] bits, const int64_t[::1] offsets, const int64_t[::1] mins,
               int64_t lam, Py_ssize_t key_lo, Py_ssize_t key_hi):
    """Bucket scan with the key-gap skip and the sound min-row cut-off.

    Buckets are sorted lexicographically, so min-rows are non-decreasing
    along a bucket.  Once ``a`` members of R_i lie below min(R_j), every later
    R_j in the bucket has |R_i ^ R_j| >= 2a + key gap; the inner loop stops
    when that bound reaches ``lam``.
    """
    cdef vector[int64_t] out_i, out_j, out_l
    cdef Py_ssize_t n_keys = offsets.shape[0] - 1
    cdef Py_ssize_t words = bits.shape[1]
    cdef Py_ssize_t k1, k2, i, j, s1, e1, s2, e2, k2_end
    cdef int64_t gap, m_cur, below, ell
    if key_hi > n_keys:
        key_hi = n_keys
    with nogil:
        for k1 in range(key_lo, key_hi):
            s1 = offsets[k1]
            e1 = offsets[k1 + 1]
            if s1 == e1:
                continue
            k2_end = k1 + lam
            if k2_end > n_keys:
                k2_end = n_keys
            for k2 in range(k1, k2_end):
                s2 = offsets[k2]
                e2 = offsets[k2 + 1]
                if s2 == e2:
                    continue
                gap = k2 - k1
                for i in range(s1, e1):
                    m_cur = -1
                    j = i + 1 if k1 == k2 else s2
                    while j < e2:
                        if mins[j] != m_cur:
                            m_cur = mins[j]
                            below = _count_below(bits, i, m_cur, words)
                            if 2 * below + gap >= lam:
                                break
                        ell = _xor_count(bits, i, j, words)
                        if ell < lam:
                            out_i.push_back(i)
                            out_j.push_back(j)
                            out_l.push_back(ell)
                        j += 1
    cdef Py_ssize_t n = out_i.size()
    ri = np.empty(n, dtype=np.int64)
    rj = np.empty(n, dtype=np.int64)
    rl = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] vi = ri, vj = rj, vl = rl
    for i in range(n):
        vi[i] = out_i[i]
        vj[i] = out_j[i]
        vl[i] = out_l[i]
    return ri, rj, rl


def population_fitness(pop, int v, factors, levels, first, second, need):
    cdef const uint8_t[:, :, ::1] P_ = np.ascontiguousarray(pop, dtype=np.uint8)
    cdef const int64_t[:, ::1] F = np.ascontiguousarray(factors, dtype=np.int64)
    cdef const int64_t[:, ::1] L = np.ascontiguousarray(levels, dtype=np.int64)
    cdef const int64_t[:, ::1] D1 = np.ascontiguousarray(first, dtype=np.int64)
    cdef const int64_t[:, ::1] D2 = np.ascontiguousarray(second, dtype=np.int64)
    cdef const int64_t[::1] need_ = np.ascontiguousarray(need, dtype=np.int64)
    cdef Py_ssize_t n_pop = P_.shape[0], n = P_.shape[1], k = P_.shape[2]
    cdef Py_ssize_t words = max(1, (n + 63) // 64)
    cdef Py_ssize_t n_int = F.shape[0], t = F.shape[1]
    cdef Py_ssize_t n_ent = D1.shape[0], d = D1.shape[1]
    result = np.zeros(n_pop, dtype=np.int64)
    cdef int64_t[::1] out = result
    if n_ent == 0:
        return result
    masks_arr = np.zeros((k, v, words), dtype=np.uint64)
    ibits_arr = np.zeros((n_int, words), dtype=np.uint64)
    cdef uint64_t[:, :, ::1] masks = masks_arr
    cdef uint64_t[:, ::1] ibits = ibits_arr
    cdef Py_ssize_t p, r, c, u, w, j, e
    cdef uint64_t acc, a, b
    cdef int64_t cnt, fit
    with nogil:
        for p in range(n_pop):
            for c in range(k):
                for j in range(v):
                    for w in range(words):
                        masks[c, j, w] = 0
            for r in range(n):
                for c in range(k):
                    masks[c, P_[p, r, c], r >> 6] |= (<uint64_t>1) << (r & 63)
            for u in range(n_int):
                for w in range(words):
                    acc = masks[F[u, 0], L[u, 0], w]
                    for j in range(1, t):
                        acc &= masks[F[u, j], L[u, j], w]
                    ibits[u, w] = acc
            fit = 0
            for e in range(n_ent):
                cnt = 0
                for w in range(words):
                    a = 0
                    b = 0
                    for j in range(d):
                        if D1[e, j] >= 0:
                            a |= ibits[D1[e, j], w]
                        if D2[e, j] >= 0:
                            b |= ibits[D2[e, j], w]
                    cnt += __builtin_popcountll(a ^ b)
                if cnt >= need_[e]:
                    fit += 1
            out[p] = fit
    return result
