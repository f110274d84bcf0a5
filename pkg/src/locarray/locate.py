"""Row-sets of d-sets, their partition by size, and the non-locating pair search.

Two d-sets form a locating pair when the symmetric difference of their
row-sets has at least ``lam`` rows.  Since ``||R1| - |R2|| <= |R1 ^ R2|``,
sets whose row counts differ by ``lam`` or more never need comparing; the
:class:`RowMap` groups sets by row count so that only buckets closer than
``lam`` are scanned.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .covering import CoverageReport, verify_ca
from .model import (
    DSet,
    DSetMode,
    Interaction,
    Params,
    TestArray,
    count_pairs,
    dset_from_indices,
    dset_table,
    enumerate_dsets,
    enumerate_interactions,
    interaction_table,
)
from .timing import Deadline, check

RowSet = tuple[int, ...]

# brute-force oracle refuses beyond this many pairs
DEFAULT_PAIR_CAP = 100_000_000


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("LOCARRAY_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, order=True)
class NonLocEntry:
    first: DSet
    second: DSet
    ell: int

    def __post_init__(self):
        if not self.first < self.second:
            raise ValueError("NonLocEntry requires first < second in canonical order")
        if self.ell < 0:
            raise ValueError("ell must be non-negative")

    def __str__(self) -> str:
        return f"{self.first} vs {self.second} (symmetric difference {self.ell})"


# ---------------------------------------------------------------- row-sets


def compute_rho(array: TestArray, interaction: Interaction) -> RowSet:
    """Rows (0-based, ascending) in which every (factor, level) pair of ``interaction`` holds."""
    interaction.check(array.params)
    mask = np.ones(array.N, dtype=bool)
    for f, x in interaction.pairs:
        mask &= array.rows[:, f] == x
    return tuple(int(r) for r in np.flatnonzero(mask))


def compute_rho_dset(array: TestArray, dset: DSet) -> RowSet:
    rows: set[int] = set()
    for interaction in dset:
        rows.update(compute_rho(array, interaction))
    return tuple(sorted(rows))


def symmetric_difference_size(a: Sequence[int], b: Sequence[int]) -> int:
    """|a ^ b| for two strictly ascending row sequences (linear merge)."""
    return kernels.symdiff_sorted(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))


def interaction_membership(rows: np.ndarray, factors: np.ndarray, levels: np.ndarray,
                           chunk: int = 4096) -> np.ndarray:
    """(S1, N) boolean matrix: interaction u appears in row r."""
    out = np.empty((len(factors), rows.shape[0]), dtype=bool)
    for s in range(0, len(factors), chunk):
        f, l = factors[s:s + chunk], levels[s:s + chunk]
        out[s:s + chunk] = np.all(rows[:, f] == l[None, :, :], axis=2).T
    return out


def dset_bits(array: TestArray, params: Params, mode: DSetMode = DSetMode.AT_MOST):
    """Packed row-sets of every d-set, in canonical order, plus the member table."""
    factors, levels = interaction_table(params)
    ibits = kernels.pack_membership(interaction_membership(array.rows, factors, levels))
    table = dset_table(params, mode)
    padded = np.vstack([ibits, np.zeros((1, ibits.shape[1]), dtype=np.uint64)])
    bits = padded[table[:, 0]].copy()
    for j in range(1, table.shape[1]):
        bits |= padded[table[:, j]]  # -1 selects the zero row
    return bits, table


# ---------------------------------------------------------------- partition


@dataclass(eq=False)
class RowMap:
    """All d-sets grouped into buckets by row count.

    Arrays are stored in bucket order: bucket ``r`` occupies positions
    ``offsets[r]:offsets[r+1]`` and is sorted lexicographically by row-set.
    ``order`` maps positions back to canonical d-set ids (enumeration order).
    """

    params: Params
    n_rows: int
    mode: DSetMode
    table: np.ndarray
    order: np.ndarray
    offsets: np.ndarray
    bits: np.ndarray
    mins: np.ndarray
    timings: dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.order)

    @property
    def keys(self) -> range:
        return range(self.n_rows + 1)

    def bucket_size(self, r: int) -> int:
        return int(self.offsets[r + 1] - self.offsets[r])

    def histogram(self) -> dict[int, int]:
        sizes = np.diff(self.offsets)
        return {int(r): int(n) for r, n in enumerate(sizes) if n}

    @cached_property
    def interactions(self) -> list[Interaction]:
        return list(enumerate_interactions(self.params))

    def dset(self, dset_id: int) -> DSet:
        return dset_from_indices(self.table[dset_id], self.interactions)

    def rowset_at(self, pos: int) -> RowSet:
        return kernels.unpack_rows(self.bits[pos], self.n_rows)

    def bucket(self, r: int) -> list[tuple[DSet, RowSet]]:
        start, stop = int(self.offsets[r]), int(self.offsets[r + 1])
        return [(self.dset(int(self.order[p])), self.rowset_at(p)) for p in range(start, stop)]


def build_rowmap(array: TestArray, params: Params | None = None,
                 mode: DSetMode = DSetMode.AT_MOST) -> RowMap:
    params = params or array.params
    n = array.N
    t0 = time.perf_counter()
    bits, table = dset_bits(array, params, mode)
    t1 = time.perf_counter()
    sizes = np.bitwise_count(bits).sum(axis=1, dtype=np.int64)
    member = np.unpackbits(bits.astype("<u8").view(np.uint8), axis=1, bitorder="little")[:, :n].astype(bool)
    # lexicographic order of ascending row lists == descending order of the
    # row-0-first membership bit strings (for sets of equal size)
    inv = ~np.packbits(member, axis=1, bitorder="big") if n else np.zeros((len(bits), 0), np.uint8)
    keys = [inv[:, c] for c in reversed(range(inv.shape[1]))] + [sizes]
    order = np.lexsort(keys) if len(bits) else np.zeros(0, dtype=np.int64)
    mins = np.where(member.any(axis=1), member.argmax(axis=1), n).astype(np.int64) if n else np.zeros(len(bits), np.int64)
    offsets = np.zeros(n + 2, dtype=np.int64)
    offsets[1:] = np.cumsum(np.bincount(sizes, minlength=n + 1))
    rowmap = RowMap(params=params, n_rows=n, mode=DSetMode(mode), table=table, order=order.astype(np.int64),
                    offsets=offsets, bits=np.ascontiguousarray(bits[order]), mins=np.ascontiguousarray(mins[order]))
    rowmap.timings = {"rho": t1 - t0, "partition": time.perf_counter() - t1}
    return rowmap


# ---------------------------------------------------------------- non-locating pairs


def _canonical(rowmap: RowMap, pos_i, pos_j, ell):
    a, b = rowmap.order[pos_i], rowmap.order[pos_j]
    first, second = np.minimum(a, b), np.maximum(a, b)
    ell = np.asarray(ell, dtype=np.int64)
    size, span = len(rowmap), int(ell.max(initial=0)) + 1
    if size * size * span < 2**62:
        # one packed key sorts far faster than a two-key lexsort
        key = (first * size + second) * span + ell
        key.sort()
        pair, ell = np.divmod(key, span)
        first, second = np.divmod(pair, size)
        return first, second, ell
    idx = np.lexsort((second, first))
    return first[idx], second[idx], ell[idx]


def find_nonlocating_ids(rowmap: RowMap, lam: int | None = None, *, threads: int | None = None,
                         deadline: Deadline | None = None):
    """Canonical (first_id, second_id, ell) arrays of every pair with |R1 ^ R2| < lam."""
    lam = rowmap.params.lam if lam is None else lam
    threads = threads or default_threads()
    n_keys = rowmap.n_rows + 1
    # key ranges sized so each holds a similar number of d-sets
    sizes = np.diff(rowmap.offsets)
    n_chunks = max(1, min(n_keys, 4 * threads))
    cuts = np.searchsorted(np.cumsum(sizes), np.linspace(0, len(rowmap), n_chunks + 1)[1:-1])
    bounds = [0] + sorted(set(int(c) + 1 for c in cuts if int(c) + 1 < n_keys)) + [n_keys]
    ranges = list(zip(bounds[:-1], bounds[1:]))

    def run(lo_hi):
        check(deadline, "non-locating scan")
        return kernels.scan_pairs(rowmap.bits, rowmap.offsets, rowmap.mins, lam, lo_hi[0], lo_hi[1])

    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, ranges))
    else:
        parts = [run(r) for r in ranges]
    check(deadline, "non-locating scan")
    pos_i = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64)
    pos_j = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int64)
    ell = np.concatenate([p[2] for p in parts]) if parts else np.zeros(0, np.int64)
    return _canonical(rowmap, pos_i, pos_j, ell)


def find_nonlocating(rowmap: RowMap, lam: int | None = None, *, threads: int | None = None,
                     deadline: Deadline | None = None) -> list[NonLocEntry]:
    """Every non-locating pair once, with its current separation, in canonical order."""
    first, second, ell = find_nonlocating_ids(rowmap, lam, threads=threads, deadline=deadline)
    cache: dict[int, DSet] = {}

    def get(i):
        i = int(i)
        if i not in cache:
            cache[i] = rowmap.dset(i)
        return cache[i]

    return [NonLocEntry(get(a), get(b), int(l)) for a, b, l in zip(first, second, ell)]


def _brute_force(array: TestArray, params: Params, mode: DSetMode, max_pairs: int):
    total = count_pairs(params, mode)
    if total > max_pairs:
        raise ValueError(f"brute force refused: {total} pairs exceeds the cap of {max_pairs}")
    rows = array.rows
    member_of = {}
    for inter in enumerate_interactions(params):
        mask = np.ones(array.N, dtype=bool)
        for f, x in inter.pairs:
            mask &= rows[:, f] == x
        member_of[inter] = mask
    dsets = list(enumerate_dsets(params, mode))
    M = np.zeros((len(dsets), array.N), dtype=bool)
    for n, ds in enumerate(dsets):
        for inter in ds:
            M[n] |= member_of[inter]
    firsts, seconds, ells = [], [], []
    for i in range(len(dsets) - 1):
        diff = np.count_nonzero(M[i + 1:] != M[i], axis=1)
        hit = np.flatnonzero(diff < params.lam)
        if len(hit):
            firsts.append(np.full(len(hit), i, dtype=np.int64))
            seconds.append(hit + i + 1)
            ells.append(diff[hit].astype(np.int64))
    if not firsts:
        empty = np.zeros(0, dtype=np.int64)
        return dsets, (empty, empty.copy(), empty.copy())
    return dsets, (np.concatenate(firsts), np.concatenate(seconds).astype(np.int64), np.concatenate(ells))


def brute_force_nonlocating_ids(array: TestArray, params: Params | None = None,
                                mode: DSetMode = DSetMode.AT_MOST, *, max_pairs: int = DEFAULT_PAIR_CAP):
    """(first_id, second_id, ell) arrays from the all-pairs search; ids are enumeration positions."""
    return _brute_force(array, params or array.params, DSetMode(mode), max_pairs)[1]


def brute_force_nonlocating(array: TestArray, params: Params | None = None,
                            mode: DSetMode = DSetMode.AT_MOST, *,
                            max_pairs: int = DEFAULT_PAIR_CAP) -> list[NonLocEntry]:
    """All-pairs reference search: no partition, no packing, no compiled code.

    Raises :class:`ValueError` when the number of pairs exceeds ``max_pairs``.
    """
    dsets, (first, second, ell) = _brute_force(array, params or array.params, DSetMode(mode), max_pairs)
    return [NonLocEntry(dsets[a], dsets[b], int(l)) for a, b, l in zip(first, second, ell)]


# ---------------------------------------------------------------- verdict


@dataclass
class LaVerdict:
    locating: bool
    coverage: CoverageReport
    witness: NonLocEntry | None = None
    nonlocating: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def uncovered(self) -> tuple[Interaction, int] | None:
        return self.coverage.deficient[0] if self.coverage.deficient else None

    def describe(self) -> str:
        if self.locating:
            return "locating"
        if self.witness is not None:
            return f"not locating: {self.nonlocating} non-locating pairs, e.g. {self.witness}"
        if self.uncovered is None:
            return "not locating"
        inter, count = self.uncovered
        return f"not locating: interaction {inter} covered {count} < {self.coverage.lam} times"


def verify_la(array: TestArray, params: Params | None = None, *, method: str = "partition",
              mode: DSetMode = DSetMode.AT_MOST, max_pairs: int = DEFAULT_PAIR_CAP,
              deadline: Deadline | None = None) -> LaVerdict:
    """Check the covering condition and every pair of d-sets from scratch.

    ``method`` is ``"partition"`` (bucket scan) or ``"brute"`` (all pairs).
    """
    params = params or array.params
    if params != array.params:
        array = array.with_params(params)
    coverage = verify_ca(array)
    if method == "brute":
        dsets, (first, second, ell) = _brute_force(array, params, DSetMode(mode), max_pairs)
        witness = NonLocEntry(dsets[first[0]], dsets[second[0]], int(ell[0])) if len(first) else None
    elif method == "partition":
        rowmap = build_rowmap(array, params, mode)
        first, second, ell = find_nonlocating_ids(rowmap, params.lam, deadline=deadline)
        witness = NonLocEntry(rowmap.dset(int(first[0])), rowmap.dset(int(second[0])), int(ell[0])) if len(first) else None
    else:
        raise ValueError(f"unknown verification method {method!r}")
    notes = []
    if params.d >= params.v:
        notes.append(f"d={params.d} >= v={params.v}: a locating array may not exist for these parameters")
    return LaVerdict(
        locating=coverage.ok and witness is None,
        coverage=coverage,
        witness=witness,
        nonlocating=len(first),
        warnings=notes,
    )
