import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locarray import kernels
from locarray.locate import build_rowmap
from locarray.model import Params, TestArray

sorted_sets = st.sets(st.integers(0, 200), max_size=40).map(sorted)


@given(sorted_sets, sorted_sets)
@settings(max_examples=200)
def test_symdiff_matches_sets(a, b):
    for impl in kernels.available_backends().values():
        assert impl.symdiff_sorted(np.array(a, dtype=np.int64), np.array(b, dtype=np.int64)) == len(set(a) ^ set(b))


def test_symdiff_edge_cases(kernel_backend):
    assert kernels.symdiff_sorted([], []) == 0
    assert kernels.symdiff_sorted([1, 2, 3], []) == 3
    assert kernels.symdiff_sorted([1, 5], [1, 5]) == 0
    assert kernels.symdiff_sorted([0, 5], [1, 6]) == 4


@given(st.lists(st.booleans(), min_size=1, max_size=200))
def test_pack_unpack_round_trip(bits):
    member = np.array([bits])
    words = kernels.pack_membership(member)
    assert words.shape == (1, kernels.words_for(len(bits)))
    assert kernels.unpack_rows(words[0], len(bits)) == tuple(np.flatnonzero(bits).tolist())


@pytest.mark.parametrize("seed", range(8))
def test_backends_agree_on_scan(seed):
    backends = kernels.available_backends()
    if len(backends) < 2:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 70))
    p = Params(k=5, v=3, t=2, d=2, lam=int(rng.integers(1, 4)))
    rm = build_rowmap(TestArray(rng.integers(0, 3, size=(n, 5)), p), p)
    out = {name: impl.scan_pairs(rm.bits, rm.offsets, rm.mins, p.lam, 0, n + 1) for name, impl in backends.items()}

    def as_set(res):
        return set(zip(*(r.tolist() for r in res)))

    assert as_set(out["python"]) == as_set(out["cython"])


@pytest.mark.parametrize("seed", range(5))
def test_backends_agree_on_fitness(seed):
    backends = kernels.available_backends()
    if len(backends) < 2:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(seed)
    k, v, t, d, P, n, U, E = 6, 3, 2, 2, 12, int(rng.integers(1, 80)), 30, 50
    pop = rng.integers(0, v, size=(P, n, k), dtype=np.uint8)
    factors = np.sort(np.array([rng.choice(k, t, replace=False) for _ in range(U)]), axis=1).astype(np.int64)
    levels = rng.integers(0, v, size=(U, t)).astype(np.int64)
    first = rng.integers(-1, U, size=(E, d)).astype(np.int64)
    first[:, 0] = np.abs(first[:, 0])
    second = rng.integers(0, U, size=(E, d)).astype(np.int64)
    need = rng.integers(1, 3, size=E).astype(np.int64)
    got = [impl.population_fitness(pop, v, factors, levels, first, second, need) for impl in backends.values()]
    assert np.array_equal(got[0], got[1])


def test_fallback_selected_at_import():
    import os
    import subprocess
    import sys

    env = dict(os.environ, LOCARRAY_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from locarray import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
