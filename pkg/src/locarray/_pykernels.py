"""Numpy implementations of the hot kernels.

Used when the compiled extension is unavailable (or disabled through
``LOCARRAY_PURE_PYTHON=1``).  Every function here has an identically named,
identically behaving counterpart in ``_ckernels.pyx``.
"""

from __future__ import annotations

import numpy as np

# rows compared at once in the broadcast scan; bounds temporary memory
_CHUNK = 256


def symdiff_sorted(a, b) -> int:
    """Size of the symmetric difference of two strictly ascending sequences.

    Single linear merge over both inputs.
    """
    i = j = count = 0
    na, nb = len(a), len(b)
    while i < na and j < nb:
        x, y = a[i], b[j]
        if x == y:
            i += 1
            j += 1
        elif x < y:
            count += 1
            i += 1
        else:
            count += 1
            j += 1
    return count + (na - i) + (nb - j)


def scan_pairs(bits, offsets, mins, lam, key_lo, key_hi):
    """Non-locating pairs among buckets whose first key lies in [key_lo, key_hi).

    ``bits`` holds the packed row-sets in bucket order, ``offsets[r]`` is the
    start of bucket ``r``.  Returns positions (i, j, ell) with i < j and
    ell = |R_i ^ R_j| < lam.  ``mins`` is accepted for signature parity; this
    version does not use the min-row cut-off.
    """
    del mins
    out_i, out_j, out_l = [], [], []
    n_keys = len(offsets) - 1
    for k1 in range(key_lo, min(key_hi, n_keys)):
        s1, e1 = int(offsets[k1]), int(offsets[k1 + 1])
        if s1 == e1:
            continue
        for k2 in range(k1, min(n_keys, k1 + lam)):
            s2, e2 = int(offsets[k2]), int(offsets[k2 + 1])
            if s2 == e2:
                continue
            right = bits[s2:e2]
            for c0 in range(s1, e1, _CHUNK):
                c1 = min(c0 + _CHUNK, e1)
                left = bits[c0:c1]
                ell = np.bitwise_count(left[:, None, :] ^ right[None, :, :]).sum(axis=2, dtype=np.int64)
                hit = ell < lam
                if k1 == k2:
                    # only j > i within a bucket
                    hit &= np.arange(s2, e2)[None, :] > np.arange(c0, c1)[:, None]
                ii, jj = np.nonzero(hit)
                if len(ii):
                    out_i.append(ii + c0)
                    out_j.append(jj + s2)
                    out_l.append(ell[ii, jj])
    if not out_i:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    return (np.concatenate(out_i).astype(np.int64), np.concatenate(out_j).astype(np.int64),
            np.concatenate(out_l).astype(np.int64))


def _pack_last_axis(member: np.ndarray) -> np.ndarray:
    n = member.shape[-1]
    words = max(1, (n + 63) // 64)
    pad = words * 64 - n
    if pad:
        member = np.concatenate([member, np.zeros(member.shape[:-1] + (pad,), dtype=bool)], axis=-1)
    packed = np.packbits(member, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def population_fitness(pop, v, factors, levels, first, second, need):
    """Number of entries each block satisfies.

    ``pop`` is (P, n, k); interaction ``u`` is given by ``factors[u]`` and
    ``levels[u]``; entry ``e`` compares the union of interactions
    ``first[e]`` against ``second[e]`` (-1 = unused slot) and is satisfied
    when the block's symmetric difference reaches ``need[e]``.
    """
    pop = np.asarray(pop, dtype=np.uint8)
    P, n, k = pop.shape
    if len(need) == 0:
        return np.zeros(P, dtype=np.int64)
    # (P, k, v, n) membership -> (P, k, v, W)
    member = pop.transpose(0, 2, 1)[:, :, None, :] == np.arange(v, dtype=np.uint8)[None, None, :, None]
    masks = _pack_last_axis(member)
    words = masks.shape[-1]
    ibits = masks[:, factors[:, 0], levels[:, 0], :]
    for j in range(1, factors.shape[1]):
        ibits = ibits & masks[:, factors[:, j], levels[:, j], :]
    # trailing zero row stands in for unused (-1) slots
    ibits = np.concatenate([ibits, np.zeros((P, 1, words), dtype=np.uint64)], axis=1)
    a = np.bitwise_or.reduce(ibits[:, first, :], axis=2)
    b = np.bitwise_or.reduce(ibits[:, second, :], axis=2)
    delta = np.bitwise_count(a ^ b).sum(axis=2, dtype=np.int64)
    return (delta >= np.asarray(need)[None, :]).sum(axis=1).astype(np.int64)
