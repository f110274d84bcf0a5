import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locarray.arrayfile import (ArrayFormatError, format_array, format_array_json, parse_array, read_array,
                                read_array_with_metadata, write_array)
from locarray.model import Params, TestArray


@st.composite
def arrays(draw):
    k = draw(st.integers(1, 6))
    v = draw(st.integers(2, 4))
    t = draw(st.integers(1, k))
    n = draw(st.integers(1, 10))
    rows = draw(st.lists(st.lists(st.integers(0, v - 1), min_size=k, max_size=k), min_size=n, max_size=n))
    return TestArray(np.array(rows), Params(k=k, v=v, t=t, lam=draw(st.integers(1, 3))))


@given(arrays())
@settings(max_examples=50)
def test_text_round_trip_is_byte_identical(array):
    text = format_array(array)
    again, _ = parse_array(text)
    assert again == array
    assert format_array(again) == text


@given(arrays())
@settings(max_examples=30)
def test_json_round_trip_keeps_metadata(array):
    text = format_array_json(array, {"generator": "ipo", "seed": 3})
    again, meta = parse_array(text)
    assert again == array
    assert meta["generator"] == "ipo" and meta["seed"] == 3 and meta["schema"] == 1
    assert format_array_json(again, {k: v for k, v in meta.items() if k != "schema"}) == text


def test_fixture_reads(fixture_array):
    small_la = fixture_array("small_la")
    assert (small_la.N, small_la.k, small_la.params.v, small_la.params.t, small_la.params.lam) == (7, 4, 2, 2, 1)


@pytest.mark.parametrize("text,line,message", [
    ("3 2 2 2\n0 1\n", 1, "header"),
    ("2 2 2 2 1\n0 1\n1\n", 3, "ragged"),
    ("2 2 2 2 1\n0 1\n# note\n1 2\n", 4, "outside"),
    ("0 2 2 2 1\n", 1, "zero rows"),
    ("1 2 2 2 1\n0 1\n1 0\n", 3, "more than"),
    ("1 2 2 2 1\n0 x\n", 2, "non-integer"),
])
def test_errors_carry_line_numbers(text, line, message):
    with pytest.raises(ArrayFormatError, match=message) as info:
        parse_array(text)
    assert info.value.line == line


def test_short_file_is_rejected():
    with pytest.raises(ArrayFormatError, match="declares 3 rows"):
        parse_array("3 2 2 2 1\n0 1\n")


def test_json_zero_rows():
    with pytest.raises(ArrayFormatError, match="zero rows"):
        parse_array(json.dumps({"N": 0, "k": 2, "v": 2, "t": 2, "lambda": 1, "rows": []}))


def test_write_is_atomic_and_readable(tmp_path, fixture_array):
    arr = fixture_array("small_ca")
    out = tmp_path / "a.json"
    write_array(arr, out, {"seed": 1}, structured=True)
    back, meta = read_array_with_metadata(out)
    assert back == arr and meta["seed"] == 1
    assert [p.name for p in tmp_path.iterdir()] == ["a.json"]
    buf = io.StringIO()
    write_array(arr, buf)
    assert read_array(io.StringIO(buf.getvalue())) == arr
