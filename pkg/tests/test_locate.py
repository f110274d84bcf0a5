import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from locarray.locate import (NonLocEntry, brute_force_nonlocating, brute_force_nonlocating_ids, build_rowmap,
                             compute_rho, compute_rho_dset, dset_bits, find_nonlocating, find_nonlocating_ids,
                             symmetric_difference_size, verify_la)
from locarray.model import DSet, DSetMode, Interaction, LocatingWarning, Params, TestArray
from locarray.timing import BudgetExceeded, Deadline


def inter(*pairs_one_based):
    """Interaction from 1-based factor indices, as written in reports."""
    return Interaction(tuple((f - 1, x) for f, x in pairs_one_based))


def one_based(rows):
    return {r + 1 for r in rows}


@pytest.mark.parametrize("pairs,expected", [
    (((1, 0), (3, 0)), {1, 6}),
    (((1, 0), (3, 1)), {2}),
    (((1, 1), (3, 0)), {4, 5}),
    (((1, 1), (3, 1)), {3}),
])
def test_small_ca_rowsets(fixture_array, pairs, expected):
    assert one_based(compute_rho(fixture_array("small_ca"), inter(*pairs))) == expected


def test_small_la_rowsets_and_separation(fixture_array):
    arr = fixture_array("small_la")
    r1 = compute_rho(arr, inter((1, 0), (3, 0)))
    r2 = compute_rho(arr, inter((2, 1), (4, 0)))
    assert one_based(r1) == {4, 5}
    assert one_based(r2) == {1, 2}
    assert symmetric_difference_size(r1, r2) == 4


def test_small_la_is_locating(fixture_array):
    arr = fixture_array("small_la")
    for method in ("partition", "brute"):
        assert verify_la(arr, method=method).locating
    assert find_nonlocating(build_rowmap(arr)) == []


def test_wide_ca_histogram(fixture_array):
    rm = build_rowmap(fixture_array("wide_ca"))
    assert rm.histogram() == {1: 165, 2: 195, 3: 60}


def test_small_ca_is_not_locating(fixture_array):
    arr = fixture_array("small_ca")
    verdict = verify_la(arr, method="brute")
    assert verdict.coverage.ok and not verdict.locating
    w = verdict.witness
    assert symmetric_difference_size(compute_rho_dset(arr, w.first), compute_rho_dset(arr, w.second)) == w.ell == 0
    assert verify_la(arr, method="partition").nonlocating == verdict.nonlocating


def test_small_ca_pair_count_for_brute_force(fixture_array):
    # 24 interactions, so 276 pairs for d=1
    arr = fixture_array("small_ca")
    assert arr.params.num_interactions == 24
    first, second, ell = brute_force_nonlocating_ids(arr)
    assert len(first) == verify_la(arr).nonlocating


def test_single_row_rowmap():
    arr = TestArray(np.array([[0, 1]]), Params(k=2, v=2, t=2))
    rm = build_rowmap(arr)
    assert rm.histogram() == {0: 3, 1: 1}
    assert [rows for _, rows in rm.bucket(1)] == [(0,)]


def test_buckets_are_lexicographic(fixture_array):
    rm = build_rowmap(fixture_array("wide_ca"))
    for r in rm.keys:
        sets = [rows for _, rows in rm.bucket(r)]
        assert sets == sorted(sets)
        assert all(len(s) == r for s in sets)


def test_small_ca_high_lambda_matches_brute_force(fixture_array):
    arr = fixture_array("small_ca").with_params(Params(k=4, v=2, t=2, lam=5))
    assert find_nonlocating(build_rowmap(arr)) == brute_force_nonlocating(arr)


@st.composite
def random_arrays(draw):
    k = draw(st.integers(2, 5))
    v = draw(st.integers(2, 3))
    d = draw(st.integers(1, 2))
    n = draw(st.integers(1, 12))
    lam = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rows = np.random.default_rng(seed).integers(0, v, size=(n, k))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LocatingWarning)
        params = Params(k=k, v=v, t=2, d=d, lam=lam)
    return TestArray(rows, params)


@given(random_arrays(), st.sampled_from(list(DSetMode)))
@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
def test_scan_matches_brute_force(kernel_backend, array, mode):
    got = find_nonlocating_ids(build_rowmap(array, mode=mode))
    want = brute_force_nonlocating_ids(array, mode=mode)
    for a, b in zip(got, want):
        assert np.array_equal(a, b)


@given(random_arrays())
@settings(max_examples=30, deadline=None)
def test_nonlocating_pairs_have_close_sizes(array):
    rm = build_rowmap(array)
    first, second, ell = find_nonlocating_ids(rm)
    sizes = np.bitwise_count(dset_bits(array, array.params)[0]).sum(axis=1, dtype=np.int64)
    assert np.all(np.abs(sizes[first] - sizes[second]) < array.params.lam)
    assert np.all(ell < array.params.lam)
    # recompute a sample through the sorted-list path
    for n in np.linspace(0, len(first) - 1, min(len(first), 25)).astype(int):
        r1 = compute_rho_dset(array, rm.dset(int(first[n])))
        r2 = compute_rho_dset(array, rm.dset(int(second[n])))
        assert len(set(r1) ^ set(r2)) == ell[n]


@given(random_arrays(), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_appending_rows_only_removes_pairs(array, seed):
    rng = np.random.default_rng(seed)
    extra = rng.integers(0, array.params.v, size=(int(rng.integers(1, 4)), array.k))
    f0, s0, l0 = find_nonlocating_ids(build_rowmap(array))
    f1, s1, l1 = find_nonlocating_ids(build_rowmap(array.append(extra)))
    width = int(max(s0.max(initial=0), s1.max(initial=0))) + 1
    key0, key1 = f0 * width + s0, f1 * width + s1  # both sorted (canonical order)
    assert np.all(np.isin(key1, key0))
    assert np.all(l1 >= l0[np.searchsorted(key0, key1)])


def test_threads_give_identical_output():
    rng = np.random.default_rng(0)
    p = Params(k=6, v=3, t=2, d=2, lam=2)
    rm = build_rowmap(TestArray(rng.integers(0, 3, size=(20, 6)), p))
    one = find_nonlocating_ids(rm, threads=1)
    many = find_nonlocating_ids(rm, threads=4)
    assert all(np.array_equal(a, b) for a, b in zip(one, many))


def test_threads_default_from_environment(monkeypatch):
    from locarray.locate import default_threads

    monkeypatch.setenv("LOCARRAY_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("LOCARRAY_THREADS", "junk")
    assert default_threads() == 1


def test_expired_deadline_aborts_scan(fixture_array):
    rm = build_rowmap(fixture_array("wide_ca"))
    with pytest.raises(BudgetExceeded):
        find_nonlocating_ids(rm, deadline=Deadline(0.0))


def test_output_is_canonical(fixture_array):
    entries = find_nonlocating(build_rowmap(fixture_array("small_ca")))
    assert entries == sorted(entries)
    assert all(e.first < e.second for e in entries)


def test_entry_requires_order():
    a, b = DSet.of(inter((1, 0), (2, 0))), DSet.of(inter((1, 0), (2, 1)))
    NonLocEntry(a, b, 0)
    with pytest.raises(ValueError):
        NonLocEntry(b, a, 0)


def test_uncovered_interaction_is_reported(fixture_array):
    arr = fixture_array("small_la").with_params(Params(k=4, v=2, t=2, lam=2))
    verdict = verify_la(arr)
    assert not verdict.locating and verdict.uncovered is not None
    assert "covered" in verdict.describe() or verdict.witness is not None


def test_brute_force_refuses_large_inputs():
    p = Params(k=10, v=3, t=2, d=2)
    arr = TestArray(np.zeros((5, 10), dtype=np.uint8), p)
    with pytest.raises(ValueError, match="refused"):
        brute_force_nonlocating_ids(arr, max_pairs=1000)


def test_d_at_least_v_verdict_warns():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LocatingWarning)
        p = Params(k=3, v=2, t=1, d=2)
    arr = TestArray(np.array([[0, 0, 0], [1, 1, 1], [0, 1, 0], [1, 0, 1]]), p)
    verdict = verify_la(arr)
    assert verdict.warnings and "may not exist" in verdict.warnings[0]
