"""Covering array, non-locating scan, GA block, independent re-verification."""

from __future__ import annotations

import dataclasses
import logging
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .covering import generate
from .ga import GaParams, search_rows
from .locate import (DEFAULT_PAIR_CAP, LaVerdict, build_rowmap, find_nonlocating, find_nonlocating_ids,
                     verify_la)
from .model import DSetMode, Params, TestArray, count_pairs
from .timing import BudgetExceeded, Deadline

log = logging.getLogger(__name__)


class VerificationFailed(RuntimeError):
    def __init__(self, message: str, verdict: LaVerdict):
        super().__init__(message)
        self.verdict = verdict


@dataclass
class RunRecord:
    repetition: int
    seed: int | None
    base_rows: int
    nonlocating: int
    block_rows: int
    seconds: float
    ga_trace: list = field(default_factory=list)

    @property
    def total_rows(self) -> int:
        return self.base_rows + self.block_rows


@dataclass
class PipelineResult:
    array: TestArray
    verdict: LaVerdict
    verifier: str
    runs: list[RunRecord]
    timings: dict[str, float]

    @property
    def best(self) -> RunRecord:
        return min(self.runs, key=lambda r: (r.total_rows, r.repetition))


def choose_verifier(params: Params, mode: DSetMode, max_pairs: int = DEFAULT_PAIR_CAP) -> str:
    """All-pairs check when affordable, bucket scan otherwise."""
    return "brute" if count_pairs(params, mode) <= max_pairs else "partition"


def _stage_one(base: TestArray, params: Params, mode, threads, deadline, timings):
    start = time.perf_counter()
    rowmap = build_rowmap(base, params, mode)
    for key, value in rowmap.timings.items():
        timings[key] = timings.get(key, 0.0) + value
    scan_start = time.perf_counter()
    nonloc = find_nonlocating(rowmap, params.lam, threads=threads, deadline=deadline)
    timings["scan"] = timings.get("scan", 0.0) + time.perf_counter() - scan_start
    log.info("base N=%d: %d non-locating pairs (%.2fs)", base.N, len(nonloc), time.perf_counter() - start)
    return nonloc


def build_locating_array(params: Params, *, method: str = "ipo", seed: int | None = 0,
                         ga: GaParams | None = None, repetitions: int = 1,
                         mode: DSetMode = DSetMode.AT_MOST, threads: int | None = None,
                         timeout: float | None = None, verify: str = "auto",
                         max_pairs: int = DEFAULT_PAIR_CAP, lll_options: dict | None = None) -> PipelineResult:
    """Smallest locating array over ``repetitions`` runs, re-verified before it is returned.

    The deterministic generator (ipo) is run once and only the GA is
    repeated; the randomized one (lll) repeats both stages.  Repetition i
    uses seed + i.  Raises :class:`BudgetExceeded` when ``timeout`` seconds
    of wall-clock time pass, and :class:`VerificationFailed` if the final
    array does not pass the independent check.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    if timeout is not None and timeout <= 0:
        raise ValueError("timeout must be positive")
    mode = DSetMode(mode)
    ga = ga or GaParams()
    deadline = Deadline(timeout)
    timings: dict[str, float] = {}
    runs: list[RunRecord] = []
    best: TestArray | None = None
    base = nonloc = None
    try:
        for rep in range(repetitions):
            run_seed = None if seed is None else seed + rep
            start = time.perf_counter()
            if base is None or method != "ipo":
                gen_start = time.perf_counter()
                base = generate(params, method, run_seed, deadline=deadline, **(lll_options or {}))
                timings["generate"] = timings.get("generate", 0.0) + time.perf_counter() - gen_start
                nonloc = _stage_one(base, params, mode, threads, deadline, timings)
            ga_start = time.perf_counter()
            search = search_rows(nonloc, params, dataclasses.replace(ga, seed=run_seed), deadline=deadline)
            timings["ga"] = timings.get("ga", 0.0) + time.perf_counter() - ga_start
            candidate = base.append(search.block)
            record = RunRecord(rep, run_seed, base.N, len(nonloc), search.height,
                               round(time.perf_counter() - start, 6), list(search.state.trace))
            runs.append(record)
            log.info("repetition %d: N=%d (%d + %d)", rep, record.total_rows, base.N, search.height)
            if best is None or candidate.N < best.N:
                best = candidate.with_params(params)
                best.metadata.update(generator=method, seed=run_seed, base_rows=base.N,
                                     block_rows=search.height, nonlocating=len(nonloc))
    except BudgetExceeded as exc:
        raise BudgetExceeded(str(exc), partial={
            "completed_runs": [dataclasses.asdict(r) for r in runs],
            "elapsed": round(deadline.elapsed, 3),
            "base_rows": None if base is None else base.N,
            "nonlocating": None if nonloc is None else len(nonloc),
            "ga_state": _describe_partial(exc.partial),
        }) from exc

    verifier = choose_verifier(params, mode, max_pairs) if verify == "auto" else verify
    ver_start = time.perf_counter()
    verdict = verify_la(best, params, method=verifier, mode=mode, max_pairs=max_pairs)
    timings["verify"] = time.perf_counter() - ver_start
    if not verdict.locating:
        raise VerificationFailed(f"constructed array failed verification: {verdict.describe()}", verdict)
    best.metadata.update(verified_by=verifier, mode=mode.value)
    return PipelineResult(best, verdict, verifier, runs, {k: round(v, 6) for k, v in timings.items()})


def _describe_partial(partial):
    if partial is None or isinstance(partial, dict):
        return partial
    if hasattr(partial, "trace"):
        return {"trace": [list(t) for t in partial.trace], "n_lo": partial.n_lo, "n_hi": partial.n_hi}
    return repr(partial)


def analyze_array(array: TestArray, params: Params | None = None, *, mode: DSetMode = DSetMode.AT_MOST,
                  threads: int | None = None) -> dict:
    """Bucket histogram, non-locating count, residual histogram and sub-stage timings."""
    params = params or array.params
    rowmap = build_rowmap(array, params, mode)
    start = time.perf_counter()
    first, _, ell = find_nonlocating_ids(rowmap, params.lam, threads=threads)
    scan = time.perf_counter() - start
    residual = Counter(int(x) for x in ell)
    return {
        "N": array.N,
        "dsets": len(rowmap),
        "histogram": {str(k): v for k, v in rowmap.histogram().items()},
        "nonlocating": int(len(first)),
        "ell_histogram": {str(k): residual[k] for k in sorted(residual)},
        "timings": {"rho": round(rowmap.timings["rho"], 6), "partition": round(rowmap.timings["partition"], 6),
                    "scan": round(scan, 6)},
    }


def block_height_summary(runs: list[RunRecord]) -> dict:
    totals = np.array([r.total_rows for r in runs])
    return {"min": int(totals.min()), "max": int(totals.max()), "mean": round(float(totals.mean()), 3)}
