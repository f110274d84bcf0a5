"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 timeout or exhausted budget, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import time
import warnings
from typing import Sequence

from . import kernels
from .arrayfile import SCHEMA_VERSION, ArrayFormatError, read_array, write_array
from .covering import LllFailure, generate, verify_ca
from .ga import GaParams
from .locate import DEFAULT_PAIR_CAP, build_rowmap, default_threads, find_nonlocating_ids, verify_la
from .model import DSetMode, LocatingWarning, Params, ParamsError, count_dsets, count_pairs
from .pipeline import VerificationFailed, analyze_array, block_height_summary, build_locating_array
from .timing import BudgetExceeded

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_VERIFY = 0, 2, 3, 4

# wall-clock fields that would make repeated runs differ byte for byte
_VOLATILE = ("seconds",)


class UsageError(Exception):
    pass


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _add_params(p: argparse.ArgumentParser, *, with_d: bool = True, required: bool = True) -> None:
    p.add_argument("-k", type=int, required=required, help="number of factors")
    p.add_argument("-v", type=int, required=required, help="levels per factor")
    p.add_argument("-t", type=int, default=2, help="interaction strength (default 2)")
    if with_d:
        p.add_argument("-d", type=int, default=1, help="maximum d-set size (default 1)")
    p.add_argument("--lambda", dest="lam", type=int, default=1, help="separation / coverage multiplicity")
    p.add_argument("--strict", action="store_true", help="make d >= v an error instead of a warning")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("text", "json"), default="text", help="report format")
    p.add_argument("-q", "--quiet", action="store_true")
    p.add_argument("--verbose", action="store_true", help="log progress to stderr")


def _add_generation(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("ipo", "lll"), default="ipo")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-rows", type=_positive_int, help="LLL row count (default from the size formula)")
    p.add_argument("--growth-constant", type=_positive_float, help="LLL size-formula constant")
    p.add_argument("--max-resamples", type=_positive_int, help="LLL resampling budget")


def _add_ga(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("genetic search")
    g.add_argument("--population", type=int, default=100)
    g.add_argument("--generations", type=int, default=100)
    g.add_argument("--mutation-rate", type=float, default=0.30)
    g.add_argument("--crossover-rate", type=float, default=0.10)
    g.add_argument("--max-evolve-calls", type=int, default=48)
    g.add_argument("--literal-initial-height", action="store_true",
                   help="start the height search at the largest ell rather than the largest lambda - ell")


def _add_scan(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[m.value for m in DSetMode], default=DSetMode.AT_MOST.value,
                   help="d-sets of size 1..d (at-most-d) or exactly d")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="scan threads (default: $LOCARRAY_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="locarray", description="Covering and locating array construction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s (kernels: {kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-ca", help="generate a covering array")
    _add_params(p, with_d=False)
    _add_generation(p)
    p.add_argument("-o", "--output", help="array file (default: stdout)")
    p.add_argument("--array-format", choices=("text", "json"), default="text")
    _add_common(p)

    p = sub.add_parser("gen-la", help="generate a verified locating array")
    _add_params(p)
    _add_generation(p)
    _add_ga(p)
    _add_scan(p)
    p.add_argument("--timeout", type=_positive_float, help="wall-clock seconds across both stages")
    p.add_argument("--repetitions", type=_positive_int, default=1)
    p.add_argument("--verify", choices=("auto", "brute", "partition"), default="auto")
    p.add_argument("--max-pairs", type=_positive_int, default=DEFAULT_PAIR_CAP,
                   help="largest pair count the all-pairs verifier will attempt")
    p.add_argument("-o", "--output", help="array file (default: stdout)")
    p.add_argument("--array-format", choices=("text", "json"), default="text")
    _add_common(p)

    p = sub.add_parser("analyze", help="bucket histogram and non-locating pairs of an array")
    p.add_argument("array")
    p.add_argument("-d", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=int, help="override the file's lambda")
    _add_scan(p)
    _add_common(p)

    p = sub.add_parser("verify", help="check an array file")
    p.add_argument("kind", choices=("ca", "la"))
    p.add_argument("array")
    p.add_argument("-d", type=int, default=1)
    p.add_argument("-t", type=int, help="override the file's strength")
    p.add_argument("--lambda", dest="lam", type=int, help="override the file's lambda")
    p.add_argument("--method", choices=("auto", "brute", "partition"), default="auto")
    p.add_argument("--mode", choices=[m.value for m in DSetMode], default=DSetMode.AT_MOST.value)
    p.add_argument("--max-pairs", type=_positive_int, default=DEFAULT_PAIR_CAP)
    _add_common(p)

    p = sub.add_parser("count", help="number of interactions, d-sets and d-set pairs")
    _add_params(p)
    p.add_argument("--mode", choices=[m.value for m in DSetMode], default=DSetMode.EXACT.value)
    _add_common(p)

    p = sub.add_parser("experiment", help="seeded repetitions over a range of k")
    p.add_argument("-k", type=int, nargs="+", required=True)
    p.add_argument("-v", type=int, required=True)
    p.add_argument("-t", type=int, default=2)
    p.add_argument("-d", type=int, nargs="+", default=[1], help="d values for the non-locating count")
    p.add_argument("--lambda", dest="lam", type=int, default=1)
    p.add_argument("--stage", choices=("ca", "la"), default="ca",
                   help="ca: covering array plus non-locating counts; la: full construction")
    p.add_argument("--seeds", type=_positive_int, default=1, help="seeds 0..n-1 (offset by --seed)")
    p.add_argument("--strict", action="store_true")
    _add_generation(p)
    _add_ga(p)
    _add_scan(p)
    p.add_argument("--timeout", type=_positive_float, help="per-run wall-clock limit (la stage)")
    _add_common(p)
    return parser


# ---------------------------------------------------------------- helpers


def _params(args, **overrides) -> Params:
    values = dict(k=args.k, v=args.v, t=args.t, d=getattr(args, "d", 1), lam=args.lam, strict=args.strict)
    values.update(overrides)
    try:
        return Params(**values)
    except ParamsError as exc:
        raise UsageError(str(exc)) from exc


def _ga(args) -> GaParams:
    try:
        return GaParams(population_size=args.population, generations=args.generations,
                        mutation_rate=args.mutation_rate, crossover_rate=args.crossover_rate,
                        max_evolve_calls=args.max_evolve_calls,
                        literal_initial_height=args.literal_initial_height)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _lll_options(args) -> dict:
    options = {}
    if args.initial_rows is not None:
        options["initial_rows"] = args.initial_rows
    if args.growth_constant is not None:
        options["growth_constant"] = args.growth_constant
    if args.max_resamples is not None:
        options["max_resamples"] = args.max_resamples
    return options


def _stable(metadata: dict) -> dict:
    return {k: v for k, v in metadata.items() if k not in _VOLATILE}


def _emit(args, report: dict, lines: Sequence[str], stream=None) -> None:
    if args.quiet:
        return
    stream = stream or sys.stdout
    if args.format == "json":
        stream.write(json.dumps({"schema": SCHEMA_VERSION, **report}, sort_keys=True) + "\n")
    else:
        stream.write("\n".join(lines) + "\n")


def _write_output(args, array, metadata: dict) -> None:
    structured = args.array_format == "json"
    write_array(array, args.output or sys.stdout, _stable(metadata), structured=structured)


def _report_stream(args):
    # keep stdout clean for the array when no output file is given
    return sys.stdout if args.output else sys.stderr


def _read(args, d: int):
    try:
        array = read_array(args.array, d=d)
    except FileNotFoundError as exc:
        raise UsageError(f"cannot read {args.array}: {exc.strerror}") from exc
    except (ArrayFormatError, ParamsError) as exc:
        raise UsageError(f"{args.array}: {exc}") from exc
    changes = {}
    if getattr(args, "lam", None) is not None:
        changes["lam"] = args.lam
    if getattr(args, "t", None) is not None:
        changes["t"] = args.t
    if changes:
        try:
            array = array.with_params(array.params.replace(**changes))
        except ParamsError as exc:
            raise UsageError(str(exc)) from exc
    return array


# ---------------------------------------------------------------- commands


def cmd_gen_ca(args) -> int:
    params = _params(args, d=1)
    start = time.perf_counter()
    try:
        array = generate(params, args.method, args.seed, **(_lll_options(args) if args.method == "lll" else {}))
    except LllFailure as exc:
        _emit(args, {"command": "gen-ca", "status": "failed", "error": str(exc), "resamples": exc.resamples,
                     "min_coverage": exc.report.min_coverage, "deficient": len(exc.report.deficient)},
              [f"error: {exc}", f"best coverage: {exc.report.summary()}"], sys.stderr)
        return EXIT_BUDGET
    report = verify_ca(array)
    if not report.ok:
        _emit(args, {"command": "gen-ca", "status": "verification-failed", "coverage": report.summary()},
              [f"error: generated array is not a covering array: {report.summary()}"], sys.stderr)
        return EXIT_VERIFY
    _write_output(args, array, array.metadata)
    seconds = round(time.perf_counter() - start, 6)
    _emit(args, {"command": "gen-ca", "status": "ok", "N": array.N, "method": args.method, "seed": args.seed,
                 "metadata": array.metadata, "seconds": seconds},
          [f"covering array CA_{params.lam}(N={array.N}; t={params.t}, k={params.k}, v={params.v}) "
           f"via {args.method} in {seconds:.3f}s"], _report_stream(args))
    return EXIT_OK


def cmd_gen_la(args) -> int:
    params = _params(args)
    ga = _ga(args)
    try:
        result = build_locating_array(
            params, method=args.method, seed=args.seed, ga=ga, repetitions=args.repetitions,
            mode=DSetMode(args.mode), threads=args.threads, timeout=args.timeout, verify=args.verify,
            max_pairs=args.max_pairs, lll_options=_lll_options(args) if args.method == "lll" else None)
    except BudgetExceeded as exc:
        _emit(args, {"command": "gen-la", "status": "timeout", "error": str(exc), "partial": exc.partial},
              [f"error: {exc}", f"partial: {json.dumps(exc.partial, default=str)}"], sys.stderr)
        return EXIT_BUDGET
    except LllFailure as exc:
        _emit(args, {"command": "gen-la", "status": "failed", "error": str(exc)}, [f"error: {exc}"], sys.stderr)
        return EXIT_BUDGET
    except VerificationFailed as exc:
        _emit(args, {"command": "gen-la", "status": "verification-failed", "error": str(exc)},
              [f"error: {exc}"], sys.stderr)
        return EXIT_VERIFY
    array = result.array
    _write_output(args, array, array.metadata)
    runs = [{"repetition": r.repetition, "seed": r.seed, "base_rows": r.base_rows, "nonlocating": r.nonlocating,
             "block_rows": r.block_rows, "N": r.total_rows, "seconds": r.seconds} for r in result.runs]
    lines = [f"locating array N={array.N} (base {array.metadata['base_rows']} + block "
             f"{array.metadata['block_rows']}), verified by {result.verifier}"]
    lines += [f"  run {r['repetition']}: seed {r['seed']}, N={r['N']} ({r['base_rows']} + {r['block_rows']}), "
              f"{r['nonlocating']} non-locating pairs, {r['seconds']:.2f}s" for r in runs]
    lines += [f"  {key}: {value:.3f}s" for key, value in result.timings.items()]
    lines += [f"warning: {w}" for w in result.verdict.warnings]
    _emit(args, {"command": "gen-la", "status": "ok", "N": array.N, "verified_by": result.verifier,
                 "runs": runs, "summary": block_height_summary(result.runs), "timings": result.timings,
                 "warnings": result.verdict.warnings}, lines, _report_stream(args))
    return EXIT_OK


def cmd_analyze(args) -> int:
    array = _read(args, args.d)
    report = analyze_array(array, mode=DSetMode(args.mode), threads=args.threads)
    hist = ", ".join(f"{k}: {v}" for k, v in report["histogram"].items())
    ells = ", ".join(f"{k}: {v}" for k, v in report["ell_histogram"].items()) or "none"
    lines = [f"N={report['N']}, {report['dsets']} d-sets",
             f"rows covered -> d-sets: {{{hist}}}",
             f"non-locating pairs: {report['nonlocating']}",
             f"by separation: {{{ells}}}",
             "timings: " + ", ".join(f"{k} {v:.4f}s" for k, v in report["timings"].items())]
    _emit(args, {"command": "analyze", **report}, lines)
    return EXIT_OK


def cmd_verify(args) -> int:
    array = _read(args, args.d)
    params = array.params
    if args.kind == "ca":
        report = verify_ca(array)
        if report.ok:
            _emit(args, {"command": "verify", "kind": "ca", "status": "pass", "min_coverage": report.min_coverage},
                  [f"pass: every {params.t}-way interaction covered at least {params.lam} times "
                   f"(minimum {report.min_coverage})"])
            return EXIT_OK
        inter, count = report.deficient[0]
        _emit(args, {"command": "verify", "kind": "ca", "status": "fail", "witness": str(inter),
                     "coverage": count, "deficient": len(report.deficient)},
              [f"fail: interaction {inter} covered {count} < {params.lam} times "
               f"({len(report.deficient)} deficient)"])
        return EXIT_VERIFY
    mode = DSetMode(args.mode)
    method = args.method
    if method == "auto":
        method = "brute" if count_pairs(params, mode) <= args.max_pairs else "partition"
    verdict = verify_la(array, method=method, mode=mode, max_pairs=args.max_pairs)
    for note in verdict.warnings:
        print(f"warning: {note}", file=sys.stderr)
    body = {"command": "verify", "kind": "la", "method": method, "status": "pass" if verdict.locating else "fail",
            "nonlocating": verdict.nonlocating,
            "witness": None if verdict.witness is None else {
                "first": str(verdict.witness.first), "second": str(verdict.witness.second),
                "separation": verdict.witness.ell}}
    if verdict.locating:
        _emit(args, body, [f"pass: locating for d={params.d}, t={params.t}, lambda={params.lam} ({method})"])
        return EXIT_OK
    if verdict.witness is None:
        inter, count = verdict.uncovered
        body["uncovered"] = str(inter)
        _emit(args, body, [f"fail: interaction {inter} covered {count} < {params.lam} times"])
    else:
        _emit(args, body, [f"fail: {verdict.describe()}"])
    return EXIT_VERIFY


def cmd_count(args) -> int:
    params = _params(args)
    mode = DSetMode(args.mode)
    s1, s, p = params.num_interactions, count_dsets(params, mode), count_pairs(params, mode)
    _emit(args, {"command": "count", "mode": mode.value, "interactions": s1, "dsets": s, "pairs": p},
          [f"interactions: {s1}", f"d-sets ({mode.value}): {s}", f"pairs: {p}"])
    return EXIT_OK


def cmd_experiment(args) -> int:
    rows = []
    ga = _ga(args)
    status = EXIT_OK
    for k in args.k:
        for n in range(args.seeds):
            seed = args.seed + n
            if args.stage == "ca":
                params = _params(args, k=k, d=1)
                start = time.perf_counter()
                try:
                    array = generate(params, args.method, seed,
                                     **(_lll_options(args) if args.method == "lll" else {}))
                except LllFailure as exc:
                    rows.append({"k": k, "seed": seed, "status": "failed", "error": str(exc)})
                    status = EXIT_BUDGET
                    continue
                gen = time.perf_counter() - start
                row = {"k": k, "seed": seed, "status": "ok", "N": array.N, "generate_seconds": round(gen, 4)}
                for d in args.d:
                    scan_params = params.replace(d=d)
                    t0 = time.perf_counter()
                    rowmap = build_rowmap(array.with_params(scan_params), scan_params, DSetMode(args.mode))
                    first, _, _ = find_nonlocating_ids(rowmap, threads=args.threads)
                    row[f"nonlocating_d{d}"] = int(len(first))
                    row[f"scan_d{d}_seconds"] = round(time.perf_counter() - t0, 4)
            else:
                params = _params(args, k=k, d=max(args.d))
                start = time.perf_counter()
                try:
                    result = build_locating_array(params, method=args.method, seed=seed, ga=ga,
                                                  mode=DSetMode(args.mode), threads=args.threads,
                                                  timeout=args.timeout,
                                                  lll_options=_lll_options(args) if args.method == "lll" else None)
                except (BudgetExceeded, LllFailure) as exc:
                    rows.append({"k": k, "seed": seed, "status": "timeout", "error": str(exc)})
                    status = EXIT_BUDGET
                    continue
                except VerificationFailed as exc:
                    rows.append({"k": k, "seed": seed, "status": "verification-failed", "error": str(exc)})
                    status = EXIT_VERIFY
                    continue
                row = {"k": k, "seed": seed, "status": "ok", "N": result.array.N,
                       "base_rows": result.runs[0].base_rows, "nonlocating": result.runs[0].nonlocating,
                       "seconds": round(time.perf_counter() - start, 4)}
            rows.append(row)
            if args.verbose:
                print(json.dumps(row), file=sys.stderr)
    columns = []
    for row in rows:
        columns += [c for c in row if c not in columns]
    lines = ["\t".join(columns)] + ["\t".join(str(row.get(c, "")) for c in columns) for row in rows]
    _emit(args, {"command": "experiment", "stage": args.stage, "method": args.method, "runs": rows}, lines)
    return status


COMMANDS = {"gen-ca": cmd_gen_ca, "gen-la": cmd_gen_la, "analyze": cmd_analyze, "verify": cmd_verify,
            "count": cmd_count, "experiment": cmd_experiment}


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(asctime)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = default_threads()
    try:
        previous = signal.signal(signal.SIGTERM, _raise_interrupt)
    except ValueError:  # not the main thread
        previous = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", LocatingWarning)
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"locarray: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("locarray: interrupted", file=sys.stderr)
        return 130
    finally:
        if previous is not None:
            signal.signal(signal.SIGTERM, previous)


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
