"""Covering arrays with redundancy lambda: two generators and a verifier."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import numpy as np

from .model import Interaction, Params, TestArray, enumerate_interactions
from .timing import Deadline, check

# Calibrated so that (k=10..16, v=3, t=2, lambda=2) gives 70..78 rows.
DEFAULT_GROWTH = 0.95


@dataclass
class CoverageReport:
    min_coverage: int
    deficient: list[tuple[Interaction, int]]
    histogram: dict[int, int]
    lam: int

    @property
    def ok(self) -> bool:
        return not self.deficient

    def summary(self) -> str:
        hist = ", ".join(f"{c}: {n}" for c, n in sorted(self.histogram.items()))
        return f"min coverage {self.min_coverage}, {len(self.deficient)} deficient, histogram {{{hist}}}"


class LllFailure(RuntimeError):
    """Resampling gave up; ``report`` is the best coverage seen."""

    def __init__(self, message: str, report: CoverageReport, resamples: int):
        super().__init__(message)
        self.report = report
        self.resamples = resamples


# ---------------------------------------------------------------- coverage counting


@lru_cache(maxsize=32)
def _layout(k: int, v: int, t: int):
    """Column combinations, digit weights and each (combo, code)'s canonical rank."""
    combos = np.array(list(itertools.combinations(range(k), t)), dtype=np.int64).reshape(-1, t)
    weights = v ** np.arange(t - 1, -1, -1, dtype=np.int64)
    index = {tuple(c): n for n, c in enumerate(combos.tolist())}
    rank = np.empty((len(combos), v**t), dtype=np.int64)
    interactions = list(enumerate_interactions(Params(k=k, v=v, t=t)))
    for r, inter in enumerate(interactions):
        code = int(np.dot(inter.levels, weights))
        rank[index[inter.factors], code] = r
    return combos, weights, rank, interactions


def coverage_counts(rows: np.ndarray, params: Params) -> np.ndarray:
    """(C(k,t), v**t) matrix of how many rows cover each interaction."""
    combos, weights, _, _ = _layout(params.k, params.v, params.t)
    width = params.v**params.t
    if rows.shape[0] == 0:
        return np.zeros((len(combos), width), dtype=np.int64)
    codes = (rows[:, combos].astype(np.int64) * weights).sum(axis=2)  # (N, combos)
    flat = codes + np.arange(len(combos), dtype=np.int64)[None, :] * width
    return np.bincount(flat.ravel(), minlength=len(combos) * width).reshape(len(combos), width)


def verify_ca(array: TestArray, t: int | None = None, lam: int | None = None) -> CoverageReport:
    """Exact per-interaction coverage of ``array``, gathered in one pass over all interactions."""
    params = array.params
    t = params.t if t is None else t
    lam = params.lam if lam is None else lam
    if t != params.t:
        params = params.replace(t=t)
    counts = coverage_counts(array.rows, params)
    _, _, rank, interactions = _layout(params.k, params.v, params.t)
    values, freq = np.unique(counts, return_counts=True)
    histogram = {int(a): int(b) for a, b in zip(values, freq)}
    bad = np.nonzero(counts < lam)
    order = np.argsort(rank[bad])
    deficient = [(interactions[rank[bad][n]], int(counts[bad][n])) for n in order]
    return CoverageReport(int(counts.min()), deficient, histogram, lam)


# ---------------------------------------------------------------- in-parameter order


def ipo_stages(params: Params) -> Iterator[np.ndarray]:
    """Yield the growing array after the initial block and after each added column.

    Each stage keeps every earlier row and entry; new columns fill existing
    rows first (horizontal) and then rows are appended only when some
    interaction involving the new column is still below lambda (vertical).
    """
    k, v, t, lam = params.k, params.v, params.t, params.lam
    block = np.array(list(itertools.product(range(v), repeat=t)), dtype=np.uint8).reshape(-1, t)
    A = np.tile(block, (lam, 1))
    yield A.copy()
    for col in range(t, k):
        A = _extend(A, col, v, t, lam)
        yield A.copy()


def _extend(A: np.ndarray, col: int, v: int, t: int, lam: int) -> np.ndarray:
    old = np.array(list(itertools.combinations(range(col), t - 1)), dtype=np.int64).reshape(-1, t - 1)
    m = len(old)
    weights = v ** np.arange(t - 2, -1, -1, dtype=np.int64)
    prefix = (A[:, old].astype(np.int64) * weights).sum(axis=2) if t > 1 else np.zeros((len(A), 1), np.int64)
    counts = np.zeros((m, v**t), dtype=np.int64)
    combo_ix = np.arange(m)
    levels = np.arange(v, dtype=np.int64)

    # horizontal: per row, the level covering the most still-deficient interactions
    new_col = np.empty(len(A), dtype=np.uint8)
    for r in range(len(A)):
        cells = prefix[r][:, None] * v + levels[None, :]  # (m, v)
        gain = (counts[combo_ix[:, None], cells] < lam).sum(axis=0)
        best = int(np.argmax(gain))
        new_col[r] = best
        counts[combo_ix, prefix[r] * v + best] += 1
    A = np.hstack([A, new_col[:, None]])

    # vertical
    extra = []
    while True:
        def_combo, def_code = np.nonzero(counts < lam)
        if len(def_combo) == 0:
            break
        row = _vertical_row(def_combo, def_code, old, col, v, t)
        extra.append(row)
        row_prefix = (row[old].astype(np.int64) * weights).sum(axis=1) if t > 1 else np.zeros(1, np.int64)
        counts[combo_ix, row_prefix * v + row[col]] += 1
    if extra:
        A = np.vstack([A, np.array(extra, dtype=np.uint8)])
    return A


def _vertical_row(def_combo, def_code, old, col, v, t) -> np.ndarray:
    """Greedy new row for the deficient interactions (all of which involve ``col``).

    For each new-column level that has deficient interactions, the row is
    seeded with the first such interaction and the remaining cells are
    chosen one column at a time, maximizing the deficient interactions
    still consistent with the row.  Ties go to the lower level; the best
    seed wins, ties to the lower new-column level.
    """
    new_level = def_code % v
    # levels of the old columns, most significant digit first
    digits = (def_code[:, None] // v ** np.arange(t - 1, 0, -1)[None, :]) % v if t > 1 else np.zeros((len(def_code), 0), np.int64)
    cols = old[def_combo]  # (n_def, t-1)
    best_row, best_gain = None, -1
    for l in range(v):
        pick = np.nonzero(new_level == l)[0]
        if len(pick) == 0:
            continue
        c_cols, c_lev = cols[pick], digits[pick]
        row = np.zeros(col + 1, dtype=np.uint8)
        row[col] = l
        assigned = np.zeros(col, dtype=bool)
        alive = np.ones(len(pick), dtype=bool)
        for c, a in zip(c_cols[0], c_lev[0]):  # seed: first deficient interaction in scan order
            row[c] = a
            assigned[c] = True
            alive = _consistent(c_cols, c_lev, c, a, alive)
        for c in range(col):
            if assigned[c]:
                continue
            has_c = (c_cols == c)
            rows_with = alive & has_c.any(axis=1)
            if rows_with.any():
                lev_at_c = (c_lev * has_c).sum(axis=1)
                score = np.bincount(lev_at_c[rows_with], minlength=v)
                a = int(np.argmax(score))
            else:
                a = 0
            row[c] = a
            alive = _consistent(c_cols, c_lev, c, a, alive)
        gain = int(alive.sum())
        if gain > best_gain:
            best_row, best_gain = row, gain
    return best_row


def _consistent(c_cols, c_lev, c, a, alive):
    has_c = c_cols == c
    match = ~has_c.any(axis=1) | ((c_lev * has_c).sum(axis=1) == a)
    return alive & match


def generate_ipo(params: Params, seed: int | None = None) -> TestArray:
    """Greedy in-parameter-order covering array with redundancy ``params.lam``.

    The construction is deterministic; ``seed`` is only recorded.
    """
    start = time.perf_counter()
    for A in ipo_stages(params):
        pass
    meta = {"generator": "ipo", "seed": seed, "seconds": round(time.perf_counter() - start, 6)}
    return TestArray(A, params, metadata=meta)


# ---------------------------------------------------------------- LLL resampling


@dataclass
class LllConfig:
    initial_rows: int | None = None
    growth_constant: float = DEFAULT_GROWTH
    max_resamples: int = 100_000
    seed: int | None = 0

    def __post_init__(self):
        if self.max_resamples < 1:
            raise ValueError("max_resamples must be at least 1")
        if self.initial_rows is not None and self.initial_rows < 1:
            raise ValueError("initial_rows must be positive")
        if self.growth_constant <= 0:
            raise ValueError("growth_constant must be positive")


def lll_row_count(params: Params, growth_constant: float = DEFAULT_GROWTH) -> int:
    """ceil(g * v^t * ln(C(k,t) v^t)) + lambda * v^t."""
    vt = params.v**params.t
    return math.ceil(growth_constant * vt * math.log(params.num_interactions)) + params.lam * vt


def generate_lll(params: Params, config: LllConfig | None = None, *, trace: list | None = None,
                 deadline: Deadline | None = None) -> TestArray:
    """Uniform random array repaired by resampling.

    While some interaction is covered fewer than lambda times, all N entries
    of the columns of the first such interaction (canonical order) are
    redrawn.  The row count never changes.  ``trace`` (optional list)
    receives the column tuple of every resample.
    """
    config = config or LllConfig()
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    n_rows = config.initial_rows if config.initial_rows is not None else lll_row_count(params, config.growth_constant)
    combos, _, rank, _ = _layout(params.k, params.v, params.t)
    A = rng.integers(0, params.v, size=(n_rows, params.k), dtype=np.uint8)

    def report_for(rows):
        return verify_ca(TestArray(rows, params))

    if n_rows < params.lam * params.v**params.t:
        raise LllFailure(
            f"{n_rows} rows cannot cover every interaction {params.lam} times "
            f"(need at least {params.lam * params.v ** params.t})",
            report_for(A), 0)

    resamples = 0
    best_missing, best_rows = None, None
    while True:
        counts = coverage_counts(A, params)
        bad = counts < params.lam
        missing = int(bad.sum())
        if missing == 0:
            break
        if best_missing is None or missing < best_missing:
            best_missing, best_rows = missing, A.copy()
        if resamples >= config.max_resamples:
            raise LllFailure(f"no covering array after {resamples} resamples with N={n_rows}",
                             report_for(best_rows), resamples)
        if resamples % 64 == 0:
            check(deadline, "covering array resampling")
        ranks = np.where(bad, rank, np.iinfo(np.int64).max)
        combo = int(np.unravel_index(np.argmin(ranks), ranks.shape)[0])
        cols = combos[combo]
        A[:, cols] = rng.integers(0, params.v, size=(n_rows, len(cols)), dtype=np.uint8)
        if trace is not None:
            trace.append(tuple(int(c) for c in cols))
        resamples += 1
    meta = {"generator": "lll", "seed": config.seed, "resamples": resamples,
            "seconds": round(time.perf_counter() - start, 6)}
    return TestArray(A, params, metadata=meta)


def generate(params: Params, method: str = "ipo", seed: int | None = 0, *,
             deadline: Deadline | None = None, **lll_options) -> TestArray:
    if method == "ipo":
        return generate_ipo(params, seed)
    if method == "lll":
        return generate_lll(params, LllConfig(seed=seed, **lll_options), deadline=deadline)
    raise ValueError(f"unknown covering array method {method!r}")
