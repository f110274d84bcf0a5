"""Compare the compiled and numpy kernels on the two hot loops.

    python benchmarks/bench_kernels.py [--repeat 3] [--json]
"""

import argparse
import json
import time

import numpy as np

from locarray import kernels
from locarray.covering import LllConfig, generate_lll
from locarray.ga import FitnessProblem
from locarray.locate import build_rowmap, find_nonlocating
from locarray.model import Params, TestArray


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return min(times), result


def scan_case(k, lam, d):
    params = Params(k=k, v=3, t=2, d=d, lam=lam)
    array = generate_lll(params, LllConfig(seed=0))
    rowmap = build_rowmap(array)
    n = rowmap.n_rows

    def run(impl):
        return lambda: impl.scan_pairs(rowmap.bits, rowmap.offsets, rowmap.mins, lam, 0, n + 1)

    return f"scan k={k} d={d} lambda={lam} N={n} ({len(rowmap)} d-sets)", run


def fitness_case(k, d, population, height):
    params = Params(k=k, v=3, t=2, d=d, lam=2)
    # a random base: only the pair list matters here
    array = TestArray(np.random.default_rng(1).integers(0, 3, size=(24, k)), params)
    nonloc = find_nonlocating(build_rowmap(array))
    problem = FitnessProblem(nonloc, params)
    pop = np.random.default_rng(0).integers(0, 3, size=(population, height, k), dtype=np.uint8)

    def run(impl):
        return lambda: impl.population_fitness(pop, 3, problem.factors, problem.levels, problem.first,
                                               problem.second, problem.need)

    return f"fitness k={k} d={d} {len(nonloc)} entries, {population}x{height} rows", run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args()
    backends = kernels.available_backends()
    cases = [scan_case(12, 2, 1), scan_case(10, 2, 2), scan_case(8, 3, 2),
             fitness_case(8, 1, 50, 16), fitness_case(6, 2, 50, 24)]
    rows = []
    for name, make in cases:
        row = {"case": name}
        outputs = {}
        for backend, impl in backends.items():
            row[backend], outputs[backend] = best_of(make(impl), args.repeat)
        first = [np.sort(np.asarray(o, dtype=np.int64).ravel()) for o in outputs.values()]
        row["agree"] = all(np.array_equal(first[0], other) for other in first[1:])
        if "cython" in row:
            row["speedup"] = row["python"] / row["cython"]
        rows.append(row)
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'case':62} {'python':>9} {'cython':>9} {'speedup':>8}  agree")
    for row in rows:
        cy = f"{row['cython']:.4f}" if "cython" in row else "n/a"
        sp = f"{row['speedup']:.1f}x" if "speedup" in row else ""
        print(f"{row['case']:62} {row['python']:9.4f} {cy:>9} {sp:>8}  {row['agree']}")


if __name__ == "__main__":
    main()
