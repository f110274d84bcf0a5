import warnings

import numpy as np
import pytest

from locarray.ga import (FitnessProblem, GaParams, Individual, crossover, evolve, fitness, initial_height, mutate,
                         search_rows)
from locarray.locate import NonLocEntry, build_rowmap, compute_rho_dset, find_nonlocating, verify_la
from locarray.model import DSet, Interaction, LocatingWarning, Params, TestArray
from locarray.timing import BudgetExceeded, Deadline

FAST = GaParams(population_size=20, generations=30, seed=1)


def _block_separation(block, params, entry):
    arr = TestArray(block, params)
    return len(set(compute_rho_dset(arr, entry.first)) ^ set(compute_rho_dset(arr, entry.second)))


def test_small_ca_base_with_small_la_block(fixture_array):
    params = Params(k=4, v=2, t=2, lam=2)
    base = fixture_array("small_ca").with_params(params)
    block = fixture_array("small_la").rows
    nonloc = find_nonlocating(build_rowmap(base))
    combined = find_nonlocating(build_rowmap(base.append(block)))
    assert fitness(block, nonloc, params) == len(nonloc) - len(combined)
    expected = sum(_block_separation(block, params, e) >= params.lam - e.ell for e in nonloc)
    assert fitness(block, nonloc, params) == expected


@pytest.mark.parametrize("seed", range(10))
def test_fitness_matches_rescan(kernel_backend, seed):
    rng = np.random.default_rng(seed)
    params = Params(k=5, v=3, t=2, d=int(rng.integers(1, 3)), lam=int(rng.integers(1, 3)))
    base = TestArray(rng.integers(0, 3, size=(int(rng.integers(10, 16)), 5)), params)
    block = rng.integers(0, 3, size=(int(rng.integers(1, 6)), 5))
    nonloc = find_nonlocating(build_rowmap(base))
    combined = find_nonlocating(build_rowmap(base.append(block)))
    assert fitness(block, nonloc, params) == len(nonloc) - len(combined)


def test_single_entry_fitness():
    params = Params(k=3, v=2, t=2)
    a = DSet.of(Interaction(((0, 0), (1, 0))))
    b = DSet.of(Interaction(((0, 0), (1, 1))))
    nonloc = [NonLocEntry(a, b, 0)]
    assert fitness(np.array([[0, 0, 1]]), nonloc, params) == 1
    assert fitness(np.array([[1, 1, 1]]), nonloc, params) == 0
    ind = Individual(np.array([[0, 1, 0]], dtype=np.uint8), v=2)
    assert fitness(ind, nonloc, params) == 1 and ind.fitness == 1


def test_fitness_problem_rejects_separated_entries():
    params = Params(k=3, v=2, t=2, lam=1)
    a = DSet.of(Interaction(((0, 0), (1, 0))))
    b = DSet.of(Interaction(((0, 0), (1, 1))))
    with pytest.raises(ValueError):
        FitnessProblem([NonLocEntry(a, b, 1)], params)


@pytest.mark.parametrize("op", [1, 2, 3])
def test_mutation_scope(op):
    rng = np.random.default_rng(op)
    for _ in range(50):
        block = rng.integers(0, 3, size=(5, 4), dtype=np.uint8)
        child = mutate(Individual(block, 3), rng, op=op)
        assert child.block.shape == block.shape and child.fitness is None
        assert child.block.max() < 3
        diff = child.block != block
        if op == 1:
            assert diff.any(axis=1).sum() <= 1
        elif op == 2:
            assert diff.any(axis=0).sum() <= 1
        else:
            assert diff.sum() <= 1


def test_crossover_cuts():
    rng = np.random.default_rng(0)
    a = Individual(np.zeros((3, 2), dtype=np.uint8), 2)
    b = Individual(np.ones((3, 2), dtype=np.uint8), 2)
    two = crossover(a, b, rng, op=2, cuts=(1, 2)).block
    assert two[:, 0].tolist() == [0, 1, 0]
    one = crossover(a, b, rng, op=1, cuts=(2,)).block
    assert one[:, 0].tolist() == [0, 0, 1]
    for _ in range(30):
        child = crossover(a, b, rng).block
        assert child.shape == (3, 2)
        assert all(len(set(row)) == 1 for row in child.tolist())  # rows never split


def _problem(seed=0, d=1, lam=1, n=10):
    rng = np.random.default_rng(seed)
    params = Params(k=6, v=3, t=2, d=d, lam=lam)
    base = TestArray(rng.integers(0, 3, size=(n, 6)), params)
    return base, params, find_nonlocating(build_rowmap(base))


def test_evolve_is_deterministic():
    _, params, nonloc = _problem()
    a = evolve(nonloc, params, FAST, 4)
    b = evolve(nonloc, params, FAST, 4)
    assert np.array_equal(a.block, b.block) and a.history == b.history


def test_evolve_is_elitist():
    _, params, nonloc = _problem(seed=3, n=6)
    result = evolve(nonloc, params, GaParams(population_size=10, generations=40, seed=2), 2)
    best = [h[0] for h in result.history]
    assert best == sorted(best)
    assert result.best_fitness == best[-1] <= result.target


def test_evolve_exits_early_on_success():
    _, params, nonloc = _problem(seed=1, n=12)
    result = evolve(nonloc, params, FAST, 30)
    assert result.success and result.generations < FAST.generations
    assert fitness(result.block, nonloc, params) == len(nonloc)


def test_evolve_warm_start_resizes():
    _, params, nonloc = _problem()
    first = evolve(nonloc, params, FAST, 6)
    grown = evolve(nonloc, params, FAST, 9, population=first.population)
    shrunk = evolve(nonloc, params, FAST, 3, population=first.population)
    assert grown.block.shape == (9, 6) and shrunk.block.shape == (3, 6)


def test_evolve_preconditions():
    _, params, nonloc = _problem()
    with pytest.raises(ValueError):
        evolve(nonloc, params, FAST, 0)
    with pytest.raises(ValueError):
        evolve([], params, FAST, 2)


@pytest.mark.parametrize("seed,d,lam,n", [(0, 1, 1, 12), (1, 1, 2, 12), (2, 2, 1, 24), (3, 2, 2, 30)])
def test_search_rows_separates_everything(seed, d, lam, n):
    base, params, nonloc = _problem(seed, d, lam, n=n)
    result = search_rows(nonloc, params, GaParams(population_size=30, generations=60, seed=seed))
    assert result.height >= initial_height(nonloc, params)
    assert fitness(result.block, nonloc, params) == len(nonloc)
    # the random base need not be a covering array, so only the pairs are checked
    verdict = verify_la(base.append(result.block), method="brute")
    assert verdict.witness is None and verdict.nonlocating == 0
    heights = [h for h, _, _ in result.state.trace]
    assert heights[0] == initial_height(nonloc, params)
    succeeded = [h for h, ok, _ in result.state.trace if ok]
    assert result.height == min(succeeded)
    failed = [h for h, ok, _ in result.state.trace if not ok]
    assert all(h < result.height for h in failed)


def test_search_rows_without_work():
    params = Params(k=4, v=2, t=2)
    assert search_rows([], params).height == 0


def test_literal_initial_height():
    _, params, nonloc = _problem(seed=5, lam=3, n=8)
    literal = GaParams(population_size=20, generations=30, seed=0, literal_initial_height=True)
    result = search_rows(nonloc, params, literal)
    assert result.state.trace[0][0] == max(1, max(e.ell for e in nonloc))
    assert fitness(result.block, nonloc, params) == len(nonloc)


def test_unseparable_pair_exhausts_budget():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LocatingWarning)
        params = Params(k=2, v=2, t=1, d=2)
    # each d-set covers every row, so no block can separate them
    a = DSet.of(Interaction(((0, 0),)), Interaction(((0, 1),)))
    b = DSet.of(Interaction(((1, 0),)), Interaction(((1, 1),)))
    ga = GaParams(population_size=4, generations=2, max_evolve_calls=3)
    with pytest.raises(BudgetExceeded) as info:
        search_rows([NonLocEntry(a, b, 0)], params, ga)
    assert info.value.partial.evolve_calls == 3
    assert [h for h, _, _ in info.value.partial.trace] == [1, 2, 4]


def test_deadline_stops_search():
    _, params, nonloc = _problem()
    with pytest.raises(BudgetExceeded):
        search_rows(nonloc, params, FAST, deadline=Deadline(0.0))


@pytest.mark.parametrize("kwargs", [dict(population_size=3), dict(population_size=0), dict(mutation_rate=1.5),
                                    dict(crossover_rate=-0.1), dict(generations=0)])
def test_ga_params_validation(kwargs):
    with pytest.raises(ValueError):
        GaParams(**kwargs)
