"""Parameters, interactions, d-sets and the array type shared by every stage."""

from __future__ import annotations

import enum
import functools
import itertools
import warnings
from dataclasses import dataclass, field
from math import comb
from typing import Iterator, Sequence

import numpy as np


class ParamsError(ValueError):
    """Raised for parameter combinations that can never be valid."""


class LocatingWarning(UserWarning):
    """Issued when a locating array may not exist for the requested parameters."""


class DSetMode(str, enum.Enum):
    """Which d-sets take part: all sets of size 1..d, or only sets of size exactly d."""

    AT_MOST = "at-most-d"
    EXACT = "exact-d"


@dataclass(frozen=True)
class Params:
    k: int
    v: int
    t: int
    d: int = 1
    lam: int = 1
    strict: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("k", "v", "t", "d", "lam"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ParamsError(f"{name} must be an integer, got {value!r}")
        if self.k < 1:
            raise ParamsError(f"k must be positive, got {self.k}")
        if self.v < 2:
            raise ParamsError(f"v must be at least 2, got {self.v}")
        if not 1 <= self.t <= self.k:
            raise ParamsError(f"t must satisfy 1 <= t <= k, got t={self.t}, k={self.k}")
        if self.d < 1:
            raise ParamsError(f"d must be positive, got {self.d}")
        if self.lam < 1:
            raise ParamsError(f"lambda must be positive, got {self.lam}")
        if self.d >= self.v:
            msg = (
                f"d={self.d} >= v={self.v}: the result may not be a locating array "
                "(such arrays need not exist when d >= v)"
            )
            if self.strict:
                raise ParamsError(msg)
            warnings.warn(msg, LocatingWarning, stacklevel=3)

    @property
    def num_interactions(self) -> int:
        return comb(self.k, self.t) * self.v**self.t

    def replace(self, **changes) -> "Params":
        values = dict(k=self.k, v=self.v, t=self.t, d=self.d, lam=self.lam, strict=self.strict)
        values.update(changes)
        with warnings.catch_warnings():
            if values["d"] == self.d and values["v"] == self.v:
                warnings.simplefilter("ignore", LocatingWarning)
            return Params(**values)


@functools.total_ordering
@dataclass(frozen=True)
class Interaction:
    """A t-way interaction: (factor, level) pairs sorted by factor index."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(f), int(x)) for f, x in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if not pairs:
            raise ValueError("an interaction needs at least one (factor, level) pair")
        factors = [f for f, _ in pairs]
        if any(a >= b for a, b in zip(factors, factors[1:])):
            raise ValueError(f"factor indices must be strictly increasing: {pairs}")
        if factors[0] < 0 or any(x < 0 for _, x in pairs):
            raise ValueError(f"negative factor or level in {pairs}")

    def __lt__(self, other: "Interaction") -> bool:
        if not isinstance(other, Interaction):
            return NotImplemented
        return self.pairs < other.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def factors(self) -> tuple[int, ...]:
        return tuple(f for f, _ in self.pairs)

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(x for _, x in self.pairs)

    def check(self, params: Params) -> None:
        if self.factors[-1] >= params.k or max(self.levels) >= params.v:
            raise ValueError(f"{self} lies outside k={params.k}, v={params.v}")

    def __str__(self) -> str:
        # 1-based factor indices, as in printed reports
        return "{" + ", ".join(f"({f + 1},{x})" for f, x in self.pairs) + "}"


@functools.total_ordering
@dataclass(frozen=True)
class DSet:
    """A nonempty set of distinct interactions, stored in canonical order.

    Sets are ordered first by size and then lexicographically, which is also
    the order in which :func:`enumerate_dsets` yields them.
    """

    interactions: tuple[Interaction, ...]

    def __post_init__(self):
        members = tuple(sorted(set(self.interactions)))
        if not members:
            raise ValueError("a d-set must contain at least one interaction")
        if len(members) != len(self.interactions):
            raise ValueError("duplicate interactions in d-set")
        object.__setattr__(self, "interactions", members)

    @classmethod
    def of(cls, *interactions: Interaction) -> "DSet":
        return cls(tuple(interactions))

    def _key(self):
        return (len(self.interactions), self.interactions)

    def __lt__(self, other: "DSet") -> bool:
        if not isinstance(other, DSet):
            return NotImplemented
        return self._key() < other._key()

    def __len__(self) -> int:
        return len(self.interactions)

    def __iter__(self):
        return iter(self.interactions)

    def __str__(self) -> str:
        return "[" + " ".join(str(i) for i in self.interactions) + "]"


@dataclass(frozen=True, eq=False)
class TestArray:
    """An N x k array of levels in [0, v).

    Rows are 0-based internally; reports print them 1-based.
    """

    __test__ = False  # keep pytest from collecting this class

    rows: np.ndarray
    params: Params
    metadata: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.uint8)
        if rows.ndim != 2:
            raise ValueError(f"array must be two-dimensional, got shape {rows.shape}")
        if rows.shape[1] != self.params.k:
            raise ValueError(f"array has {rows.shape[1]} columns but k={self.params.k}")
        if rows.size and int(rows.max()) >= self.params.v:
            raise ValueError(f"array entry {int(rows.max())} outside [0, {self.params.v})")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], params: Params) -> "TestArray":
        data = np.array(rows, dtype=np.int64).reshape(len(rows), params.k) if len(rows) else np.zeros((0, params.k))
        if data.size and data.min() < 0:
            raise ValueError("negative array entry")
        return cls(data, params)

    @property
    def N(self) -> int:
        return self.rows.shape[0]

    @property
    def k(self) -> int:
        return self.rows.shape[1]

    def with_params(self, params: Params) -> "TestArray":
        return TestArray(self.rows, params, dict(self.metadata))

    def append(self, block: np.ndarray) -> "TestArray":
        """Return a new array with ``block`` stacked below the existing rows."""
        block = np.asarray(block, dtype=np.uint8).reshape(-1, self.k)
        return TestArray(np.vstack([self.rows, block]), self.params)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TestArray):
            return NotImplemented
        return self.params == other.params and np.array_equal(self.rows, other.rows)

    __hash__ = None


# ---------------------------------------------------------------- enumeration


def enumerate_interactions(params: Params, strength: int | None = None) -> Iterator[Interaction]:
    """Yield all C(k,t) * v**t interactions in lexicographic order of their pairs."""
    t = params.t if strength is None else strength
    k, v = params.k, params.v

    def extend(prefix: tuple, start: int) -> Iterator[Interaction]:
        if len(prefix) == t:
            yield Interaction(prefix)
            return
        # leave room for the remaining factors
        for f in range(start, k - (t - len(prefix)) + 1):
            for x in range(v):
                yield from extend(prefix + ((f, x),), f + 1)

    return extend((), 0)


def interaction_table(params: Params) -> tuple[np.ndarray, np.ndarray]:
    """Factor and level arrays (each S1 x t) in :func:`enumerate_interactions` order."""
    t, v = params.t, params.v
    column_sets = np.array(list(itertools.combinations(range(params.k), t)), dtype=np.int64).reshape(-1, t)
    level_sets = np.array(list(itertools.product(range(v), repeat=t)), dtype=np.int64).reshape(-1, t)
    n_cols, n_lev = len(column_sets), len(level_sets)
    factors = np.repeat(column_sets, n_lev, axis=0)
    levels = np.tile(level_sets, (n_cols, 1))
    # interleave into pair order: sort by (f0, x0, f1, x1, ...)
    keys = []
    for j in reversed(range(t)):
        keys.append(levels[:, j])
        keys.append(factors[:, j])
    order = np.lexsort(keys)
    return factors[order], levels[order]


def dset_sizes(params: Params, mode: DSetMode = DSetMode.AT_MOST) -> range:
    mode = DSetMode(mode)
    return range(params.d, params.d + 1) if mode is DSetMode.EXACT else range(1, params.d + 1)


def enumerate_dsets(params: Params, mode: DSetMode = DSetMode.AT_MOST) -> Iterator[DSet]:
    """Yield every d-set once, smaller sets first, each size in lexicographic order.

    The empty set is never produced.
    """
    interactions = list(enumerate_interactions(params))
    for size in dset_sizes(params, mode):
        for combo in itertools.combinations(interactions, size):
            yield DSet(combo)


def dset_table(params: Params, mode: DSetMode = DSetMode.AT_MOST) -> np.ndarray:
    """Member interaction indices (S x d, padded with -1) in :func:`enumerate_dsets` order."""
    n = params.num_interactions
    blocks = []
    for size in dset_sizes(params, mode):
        count = comb(n, size)
        block = np.full((count, params.d), -1, dtype=np.int64)
        if size == 1:
            block[:, 0] = np.arange(n)
        elif size == 2:
            i, j = np.triu_indices(n, 1)
            block[:, 0], block[:, 1] = i, j
        elif count:
            flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), size)),
                               dtype=np.int64, count=count * size)
            block[:, :size] = flat.reshape(count, size)
        blocks.append(block)
    return np.vstack(blocks) if blocks else np.zeros((0, params.d), dtype=np.int64)


def dset_from_indices(indices: Sequence[int], interactions: Sequence[Interaction]) -> DSet:
    return DSet(tuple(interactions[i] for i in indices if i >= 0))


# ---------------------------------------------------------------- counting


def count_dsets(params: Params, mode: DSetMode = DSetMode.AT_MOST) -> int:
    n = params.num_interactions
    return sum(comb(n, i) for i in dset_sizes(params, mode))


def count_pairs(params: Params, mode: DSetMode = DSetMode.EXACT) -> int:
    """Number of unordered pairs of d-sets; exact integer arithmetic.

    ``exact-d`` gives C(C(S1, d), 2) and is the default;
    ``at-most-d`` counts pairs over all sets of size 1..d.
    """
    return comb(count_dsets(params, mode), 2)
