"""Second stage: evolve extra rows that separate the remaining non-locating pairs.

An entry (D1, D2, ell) still needs ``lam - ell`` rows in which exactly one
of the two d-sets appears.  Rows appended to an array never shrink an
existing symmetric difference, so the block can be scored on its own rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .locate import NonLocEntry
from .model import Params
from .timing import BudgetExceeded, Deadline, check

log = logging.getLogger(__name__)


@dataclass
class GaParams:
    population_size: int = 100
    generations: int = 100
    mutation_rate: float = 0.30
    crossover_rate: float = 0.10
    seed: int | None = 0
    max_evolve_calls: int = 48
    # start the height search from the largest ell instead of the largest lam - ell
    literal_initial_height: bool = False

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be even and at least 2")
        if self.generations < 1:
            raise ValueError("generations must be positive")
        for name in ("mutation_rate", "crossover_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.max_evolve_calls < 1:
            raise ValueError("max_evolve_calls must be positive")


@dataclass
class Individual:
    block: np.ndarray
    v: int
    fitness: int | None = None

    @property
    def height(self) -> int:
        return self.block.shape[0]


class FitnessProblem:
    """Non-locating entries flattened into index arrays for the fitness kernel."""

    def __init__(self, nonloc: Sequence[NonLocEntry], params: Params):
        self.params = params
        self.entries = list(nonloc)
        index: dict = {}
        first = np.full((len(self.entries), params.d), -1, dtype=np.int64)
        second = np.full_like(first, -1)
        for e, entry in enumerate(self.entries):
            for target, dset in ((first, entry.first), (second, entry.second)):
                for j, inter in enumerate(dset):
                    target[e, j] = index.setdefault(inter, len(index))
        inters = sorted(index, key=index.get)
        t = params.t
        self.factors = np.array([i.factors for i in inters], dtype=np.int64).reshape(-1, t)
        self.levels = np.array([i.levels for i in inters], dtype=np.int64).reshape(-1, t)
        self.first, self.second = first, second
        self.need = np.array([params.lam - e.ell for e in self.entries], dtype=np.int64)
        if len(self.need) and self.need.min() < 1:
            raise ValueError("every entry must have ell < lambda")

    def __len__(self) -> int:
        return len(self.entries)

    def score(self, population: np.ndarray) -> np.ndarray:
        """Fitness of each block in a (P, n, k) stack."""
        if len(self.entries) == 0:
            return np.zeros(len(population), dtype=np.int64)
        return kernels.population_fitness(population, self.params.v, self.factors, self.levels,
                                          self.first, self.second, self.need)


def fitness(individual: Individual | np.ndarray, nonloc, params: Params) -> int:
    """How many entries the block alone separates by at least ``lam - ell`` rows."""
    problem = nonloc if isinstance(nonloc, FitnessProblem) else FitnessProblem(nonloc, params)
    block = individual.block if isinstance(individual, Individual) else np.asarray(individual)
    value = int(problem.score(np.asarray(block, dtype=np.uint8)[None])[0])
    if isinstance(individual, Individual):
        individual.fitness = value
    return value


# ---------------------------------------------------------------- operators


def _mutate_block(block: np.ndarray, v: int, rng: np.random.Generator, op: int | None = None) -> np.ndarray:
    n, k = block.shape
    op = int(rng.integers(1, 4)) if op is None else op
    out = block.copy()
    if op == 1:
        out[rng.integers(n)] = rng.integers(0, v, size=k)
    elif op == 2:
        out[:, rng.integers(k)] = rng.integers(0, v, size=n)
    elif op == 3:
        out[rng.integers(n), rng.integers(k)] = rng.integers(v)
    else:
        raise ValueError(f"unknown mutation {op}")
    return out


def _crossover_block(a: np.ndarray, b: np.ndarray, rng: np.random.Generator,
                     op: int | None = None, cuts: Sequence[int] | None = None) -> np.ndarray:
    if a.shape != b.shape:
        raise ValueError("crossover needs parents of equal shape")
    n = a.shape[0]
    op = int(rng.integers(1, 3)) if op is None else op
    if op == 1:
        (c,) = cuts if cuts is not None else (int(rng.integers(0, n + 1)),)
        return np.vstack([a[:c], b[c:]])
    if op == 2:
        c1, c2 = sorted(cuts if cuts is not None else rng.integers(0, n + 1, size=2).tolist())
        return np.vstack([a[:c1], b[c1:c2], a[c2:]])
    raise ValueError(f"unknown crossover {op}")


def mutate(individual: Individual, rng: np.random.Generator, op: int | None = None) -> Individual:
    """One of: redraw a random row (1), a random column (2), or a single entry (3).

    ``op`` defaults to a uniform choice.  A redrawn entry may keep its value.
    """
    return Individual(_mutate_block(individual.block, individual.v, rng, op), individual.v)


def crossover(parent_a: Individual, parent_b: Individual, rng: np.random.Generator,
              op: int | None = None, cuts: Sequence[int] | None = None) -> Individual:
    """Row-wise 1-point (op 1) or 2-point (op 2) crossover; rows are never split."""
    return Individual(_crossover_block(parent_a.block, parent_b.block, rng, op, cuts), parent_a.v)


# ---------------------------------------------------------------- evolution


@dataclass
class EvolveResult:
    success: bool
    block: np.ndarray
    best_fitness: int
    target: int
    generations: int
    population: np.ndarray
    history: list[tuple[int, float]] = field(default_factory=list)


def _resize(population: np.ndarray, height: int, v: int, rng: np.random.Generator) -> np.ndarray:
    P, n, k = population.shape
    if height <= n:
        return population[:, :height].copy()
    fresh = rng.integers(0, v, size=(P, height - n, k), dtype=np.uint8)
    return np.concatenate([population, fresh], axis=1)


def evolve(nonloc, params: Params, ga: GaParams, n_prime: int, *, rng: np.random.Generator | None = None,
           population: np.ndarray | None = None, deadline: Deadline | None = None) -> EvolveResult:
    """Run the GA at a fixed block height.

    Each generation keeps the fitter half and refills the population from
    uniformly chosen survivors: crossover with a second survivor with
    probability ``crossover_rate``, then mutation with probability
    ``mutation_rate``, otherwise a plain copy.  Stops early once some block
    separates every entry.  ``population`` warm-starts the run and is
    truncated or padded with random rows to ``n_prime``.
    """
    if n_prime < 1:
        raise ValueError("n_prime must be at least 1")
    problem = nonloc if isinstance(nonloc, FitnessProblem) else FitnessProblem(nonloc, params)
    if len(problem) == 0:
        raise ValueError("evolve needs at least one non-locating entry")
    rng = rng if rng is not None else np.random.default_rng(ga.seed)
    P, k, v = ga.population_size, params.k, params.v
    target = len(problem)
    if population is None:
        pop = rng.integers(0, v, size=(P, n_prime, k), dtype=np.uint8)
    else:
        pop = _resize(np.asarray(population, dtype=np.uint8)[:P], n_prime, v, rng)
        if len(pop) < P:
            pop = np.concatenate([pop, rng.integers(0, v, size=(P - len(pop), n_prime, k), dtype=np.uint8)])
    fit = problem.score(pop)
    history = [(int(fit.max()), float(fit.mean()))]
    half = P // 2
    generation = 0
    while fit.max() < target and generation < ga.generations:
        check(deadline, "genetic search")
        keep = np.argsort(-fit, kind="stable")[:half]
        survivors, surv_fit = pop[keep], fit[keep]
        children = np.empty((P - half, n_prime, k), dtype=np.uint8)
        child_fit = np.full(P - half, -1, dtype=np.int64)
        for c in range(P - half):
            p = int(rng.integers(half))
            child = survivors[p]
            changed = False
            if rng.random() < ga.crossover_rate:
                other = survivors[int(rng.integers(half))]
                child = _crossover_block(child, other, rng)
                changed = True
            if rng.random() < ga.mutation_rate:
                child = _mutate_block(child, v, rng)
                changed = True
            children[c] = child
            if not changed:
                child_fit[c] = surv_fit[p]
        stale = child_fit < 0
        if stale.any():
            child_fit[stale] = problem.score(children[stale])
        pop = np.concatenate([survivors, children])
        fit = np.concatenate([surv_fit, child_fit])
        generation += 1
        history.append((int(fit.max()), float(fit.mean())))
        log.debug("height %d generation %d: best %d/%d mean %.1f", n_prime, generation, fit.max(), target, fit.mean())
    best = int(np.argmax(fit))
    order = np.argsort(-fit, kind="stable")
    return EvolveResult(
        success=bool(fit[best] >= target),
        block=pop[best].copy(),
        best_fitness=int(fit[best]),
        target=target,
        generations=generation,
        population=pop[order],
        history=history,
    )


# ---------------------------------------------------------------- height search


@dataclass
class SearchState:
    n_lo: int
    n_hi: int | None = None
    best_block: np.ndarray | None = None
    trace: list[tuple[int, bool, int]] = field(default_factory=list)
    evolve_calls: int = 0


@dataclass
class SearchResult:
    block: np.ndarray
    state: SearchState

    @property
    def height(self) -> int:
        return self.block.shape[0]


def initial_height(nonloc: Sequence[NonLocEntry], params: Params, literal: bool = False) -> int:
    """Largest residual ``lam - ell`` (a lower bound on rows needed); ``literal`` uses the largest ``ell``."""
    if literal:
        return max(1, max(e.ell for e in nonloc))
    return max(params.lam - e.ell for e in nonloc)


def search_rows(nonloc: Sequence[NonLocEntry], params: Params, ga: GaParams | None = None, *,
                deadline: Deadline | None = None) -> SearchResult:
    """Smallest block height found by doubling, then binary search on (n_lo, n_hi].

    The population from each run seeds the next one.  Raises
    :class:`BudgetExceeded` (with the partial :class:`SearchState`) when no
    height succeeds within ``ga.max_evolve_calls`` runs.
    """
    ga = ga or GaParams()
    if not nonloc:
        return SearchResult(np.zeros((0, params.k), dtype=np.uint8), SearchState(n_lo=-1, n_hi=0))
    problem = nonloc if isinstance(nonloc, FitnessProblem) else FitnessProblem(nonloc, params)
    rng = np.random.default_rng(ga.seed)
    n = initial_height(problem.entries, params, ga.literal_initial_height)
    # below the largest residual nothing can succeed: each row adds at most 1
    state = SearchState(n_lo=0 if ga.literal_initial_height else max(0, initial_height(problem.entries, params) - 1))
    population = None

    def attempt(height: int) -> EvolveResult:
        nonlocal population
        if state.evolve_calls >= ga.max_evolve_calls:
            raise BudgetExceeded(f"no block found within {ga.max_evolve_calls} GA runs", partial=state)
        check(deadline, "genetic search")
        result = evolve(problem, params, ga, height, rng=rng, population=population, deadline=deadline)
        state.evolve_calls += 1
        state.trace.append((height, result.success, result.best_fitness))
        log.info("GA height %d: %s (%d/%d)", height, "success" if result.success else "failure",
                 result.best_fitness, result.target)
        population = result.population
        return result

    while True:
        result = attempt(n)
        if result.success:
            state.n_hi, state.best_block = n, result.block
            break
        state.n_lo = max(state.n_lo, n)
        n *= 2
    while state.n_hi - state.n_lo > 1:
        mid = (state.n_lo + state.n_hi) // 2
        result = attempt(mid)
        if result.success:
            state.n_hi, state.best_block = mid, result.block
        else:
            state.n_lo = mid
    return SearchResult(state.best_block, state)
