import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invbo import formats
from invbo.errors import DataError


def test_dataset_csv_round_trip_is_exact(rng):
    X = rng.normal(size=(6, 2))
    Y = rng.normal(size=(6, 3)) * 1e-7
    obs = np.array([True, False, True, False, False, True])
    text = formats.format_dataset_csv(X, np.where(obs[:, None], Y, np.nan), obs)
    assert text.splitlines()[0] == "x_1,x_2,y_1,y_2,y_3"
    t = formats.parse_dataset_csv(text)
    np.testing.assert_array_equal(t.X, X)
    np.testing.assert_array_equal(t.observed, obs)
    np.testing.assert_array_equal(t.Y[obs], Y[obs])
    assert np.all(np.isnan(t.Y[~obs]))
    assert formats.format_dataset_csv(t.X, t.Y, t.observed) == text


@settings(max_examples=100, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(v):
    assert float(formats.fmt(v)) == v


@pytest.mark.parametrize("text,line", [
    ("", 0),
    ("\n\n", 0),
    ("x_1,z_1\n1,2\n", 1),
    ("x_1,x_3,y_1\n1,2,3\n", 1),
    ("y_1,x_1\n1,2\n", 1),
    ("x_1,y_1\n", 1),
    ("x_1,y_1\n1,2\n3\n", 3),
    ("x_1,y_1\n1,2\nabc,3\n", 3),
    ("x_1,y_1\n1,2\nnan,3\n", 3),
    ("x_1,y_1,y_2\n1,2,\n", 2),
])
def test_dataset_csv_errors_name_lines(text, line):
    with pytest.raises(DataError) as info:
        formats.parse_dataset_csv(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_target_csv():
    assert formats.parse_target_csv("y_1,y_2\n1.5,-2\n").tolist() == [1.5, -2.0]
    v = np.array([0.1, 1 / 3])
    np.testing.assert_array_equal(formats.parse_target_csv(formats.format_target_csv(v)), v)
    for bad, line in [("", 0), ("x_1,y_1\n1,2\n", 1), ("y_1\n1\n2\n", 3), ("y_1,y_2\n1\n", 2)]:
        with pytest.raises(DataError) as info:
            formats.parse_target_csv(bad)
        assert info.value.line == line


def test_summary_csv_round_trip():
    rows = [("ei", 0, -1.25, 0.5), ("ei", 1, -2.0, 0.0)]
    text = formats.format_summary_csv(rows)
    assert text.splitlines()[0] == "strategy,iteration,mean_log10_regret,std_log10_regret"
    assert formats.parse_summary_csv(text) == rows


def test_session_document():
    state = {"a": [0.1, 1e-300], "b": {"z": 1, "y": None}}
    text = formats.dump_session(state)
    assert formats.load_session(text) == state
    assert formats.dump_session(formats.load_session(text)) == text
    with pytest.raises(DataError):
        formats.load_session("")
    with pytest.raises(DataError):
        formats.load_session('{"schema_version": 99, "session": {}}')
    with pytest.raises(DataError):
        formats.load_session('{"session": {}}')
    with pytest.raises(DataError) as info:
        formats.load_session('{\n"schema_version": 1,\n oops}')
    assert info.value.line == 3


def test_write_text_atomic(tmp_path):
    p = tmp_path / "f.txt"
    formats.write_text_atomic(p, "one\n")
    formats.write_text_atomic(p, "two\n")
    assert p.read_text() == "two\n"
    assert sorted(x.name for x in tmp_path.iterdir()) == ["f.txt"]


def test_read_missing_file(tmp_path):
    with pytest.raises(DataError):
        formats.read_text(tmp_path / "nope.csv")
