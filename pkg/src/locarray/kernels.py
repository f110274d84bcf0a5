"""Kernel selection and bit packing.

The compiled extension is used when it imports; otherwise the numpy
versions take over.  Set ``LOCARRAY_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _pykernels

try:
    if os.environ.get("LOCARRAY_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("compiled kernels disabled by LOCARRAY_PURE_PYTHON")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"
_impl: ModuleType = _ckernels if _ckernels is not None else _pykernels


def available_backends() -> dict[str, ModuleType]:
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    return backends


def backend(name: str | None = None) -> ModuleType:
    if name is None:
        return _impl
    try:
        return available_backends()[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None


def symdiff_sorted(a, b) -> int:
    return int(_impl.symdiff_sorted(a, b))


def scan_pairs(bits, offsets, mins, lam, key_lo, key_hi):
    return _impl.scan_pairs(bits, offsets, mins, int(lam), int(key_lo), int(key_hi))


def population_fitness(pop, v, factors, levels, first, second, need):
    return _impl.population_fitness(pop, int(v), factors, levels, first, second, need)


def words_for(n_rows: int) -> int:
    return max(1, (n_rows + 63) // 64)


def pack_membership(member: np.ndarray) -> np.ndarray:
    """Pack an (S, N) boolean membership matrix into (S, W) uint64 words; row r is bit r % 64 of word r // 64."""
    return np.ascontiguousarray(_pykernels._pack_last_axis(np.asarray(member, dtype=bool)))


def unpack_rows(words: np.ndarray, n_rows: int) -> tuple[int, ...]:
    """Sorted row indices set in a single packed row-set."""
    member = np.unpackbits(np.ascontiguousarray(words, dtype="<u8").view(np.uint8), bitorder="little")
    return tuple(int(r) for r in np.flatnonzero(member[:n_rows]))
