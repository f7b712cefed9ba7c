import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geomediate.core_model import (
    WGS84,
    Dataset,
    ModelSpec,
    ScalingInfo,
    Schema,
    load_dataset,
    standardize,
    unstandardize,
)
from geomediate.errors import (
    DuplicateCoordinate,
    InconsistentSpec,
    MissingColumn,
    NonNumericCell,
    TooFewRows,
    ZeroVariance,
)

from conftest import make_dataset

HEADER = ["u", "v", "S_NS", "S_TS", "S_CS", "S_RS", "S_ToS", "SA", "AC"]


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def park_rows(n=128, seed=3):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0, 1200, (n, 2))
    likert = rng.integers(1, 6, (n, 7)).astype(float)
    return [[repr(float(v)) for v in np.r_[c, x]] for c, x in zip(coords, likert)]


def test_load_park_shaped_csv(tmp_path):
    path = tmp_path / "park.csv"
    rows = park_rows()
    write_rows(path, HEADER, rows)
    d = load_dataset(path)
    assert d.n == 128 and d.p == 5
    assert d.predictor_names == ("S_NS", "S_TS", "S_CS", "S_RS", "S_ToS")
    assert d.mediator_name == "SA" and d.outcome_name == "AC"
    np.testing.assert_array_equal(d.coords[:, 0], [float(r[0]) for r in rows])


def test_empty_body_is_too_few_rows(tmp_path):
    path = tmp_path / "empty.csv"
    write_rows(path, HEADER, [])
    with pytest.raises(TooFewRows):
        load_dataset(path)
    path.write_text("")
    with pytest.raises(TooFewRows):
        load_dataset(path)


def test_duplicate_coordinates(tmp_path):
    rows = park_rows(20)
    rows[7][:2] = rows[2][:2]
    path = tmp_path / "dup.csv"
    write_rows(path, HEADER, rows)
    with pytest.raises(DuplicateCoordinate) as exc:
        load_dataset(path)
    assert exc.value.details["ids"] == ["7"]
    d = load_dataset(path, jitter=True)
    span = np.ptp(d.coords, axis=0).max()
    assert len(np.unique(d.coords, axis=0)) == 20
    shift = np.abs(d.coords[7] - np.array(rows[2][:2], dtype=float))
    assert 0 < shift.max() <= 1e-6 * span


def test_missing_column_and_bad_cell(tmp_path):
    path = tmp_path / "a.csv"
    write_rows(path, HEADER[:-1], [r[:-1] for r in park_rows(10)])
    with pytest.raises(MissingColumn):
        load_dataset(path)
    rows = park_rows(10)
    rows[4][3] = "n/a"
    write_rows(path, HEADER, rows)
    with pytest.raises(NonNumericCell) as exc:
        load_dataset(path)
    assert exc.value.details == {"row": 5, "col": "S_TS"}


def test_schema_mapping_and_coord_system(tmp_path):
    header = ["lon", "lat", "a", "b", "med", "out", "key"]
    rng = np.random.default_rng(1)
    rows = [[repr(116.38 + rng.uniform(0, .01)), repr(39.99 + rng.uniform(0, .01)),
             *(repr(float(v)) for v in rng.standard_normal(4)), f"g{i}"] for i in range(12)]
    path = tmp_path / "w.csv"
    write_rows(path, header, rows)
    d = load_dataset(path, Schema(u="lon", v="lat", mediator="med", outcome="out", id="key",
                                  coord_system=WGS84))
    assert d.coord_system == WGS84
    assert d.predictor_names == ("a", "b")
    assert d.ids[3] == "g3"


def test_too_few_rows_for_predictors():
    with pytest.raises(TooFewRows):
        make_dataset(n=5, p=3)


def test_roundtrip_csv_bit_identical(tmp_path):
    d = make_dataset(n=40, p=3, seed=9)
    schema = d.to_csv(tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv", schema)
    np.testing.assert_array_equal(back.coords, d.coords)
    np.testing.assert_array_equal(back.predictors, d.predictors)
    np.testing.assert_array_equal(back.mediator, d.mediator)
    np.testing.assert_array_equal(back.outcome, d.outcome)
    assert back.ids == d.ids


def test_standardize_hand_example():
    # no predictors, so three rows satisfy n >= p + 3
    d = Dataset(coords=np.array([[0, 0], [1, 0], [0, 1.0]]), predictors=np.empty((3, 0)),
                predictor_names=(), mediator=np.array([1.0, 2, 3]),
                outcome=np.array([0.0, 5, 1]), mediator_name="M", outcome_name="y")
    z, info = standardize(d)
    np.testing.assert_allclose(z.column("M"), [-1, 0, 1])
    assert info.mean["M"] == 2.0 and info.sd["M"] == 1.0
    assert z.standardized


def test_standardize_zero_variance():
    d = Dataset(coords=np.array([[0, 0], [1, 0], [0, 1.0], [1, 1]]),
                predictors=np.array([[3.0], [3], [3], [3]]), predictor_names=("x",),
                mediator=np.arange(4.0), outcome=np.arange(4.0) ** 2,
                mediator_name="M", outcome_name="y")
    with pytest.raises(ZeroVariance) as exc:
        standardize(d)
    assert exc.value.details["column"] == "x"


def test_standardized_moments_and_idempotence():
    d = make_dataset(n=80, p=4, seed=2)
    z, _ = standardize(d)
    for name in z.variable_names:
        col = z.column(name)
        assert abs(col.mean()) < 1e-9
        assert abs(col.std(ddof=1) - 1) < 1e-9
    zz, _ = standardize(z)
    for name in z.variable_names:
        np.testing.assert_allclose(zz.column(name), z.column(name), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), shift=st.floats(-1e3, 1e3), scale=st.floats(1e-2, 1e3))
def test_unstandardize_inverts(seed, shift, scale):
    d = make_dataset(n=25, p=2, seed=seed)
    from dataclasses import replace

    d = replace(d, predictors=d.predictors * scale + shift)
    z, info = standardize(d)
    back = unstandardize(z, info)
    for name in d.variable_names:
        np.testing.assert_allclose(back.column(name), d.column(name),
                                   atol=1e-12 * max(1.0, np.abs(d.column(name)).max()))


def test_scaling_json_roundtrip(tmp_path):
    _, info = standardize(make_dataset(n=30, p=2))
    info.to_json(tmp_path / "s.json")
    again = ScalingInfo.from_json(tmp_path / "s.json")
    assert again == info
    assert ScalingInfo.from_json(info.to_json()) == info
    assert info.coefficient_to_raw(0.5, "x1", "y") == pytest.approx(
        0.5 * info.sd["y"] / info.sd["x1"])


def test_model_spec_rules(small_data):
    with pytest.raises(InconsistentSpec):
        ModelSpec("y", "M", ("x1", "M"))
    with pytest.raises(InconsistentSpec):
        ModelSpec("y", "M", ())
    with pytest.raises(InconsistentSpec):
        ModelSpec("y", "M", ("x1", "nope")).check(small_data)
    ModelSpec("y", "M", ("x1", "x3")).check(small_data)


def test_design_matrix(small_data):
    y, X, names = small_data.design("y", ["x2", "M"])
    assert names == ["Intercept", "x2", "M"]
    np.testing.assert_array_equal(X[:, 0], 1.0)
    np.testing.assert_array_equal(X[:, 2], small_data.mediator)
    np.testing.assert_array_equal(y, small_data.outcome)


def test_dataset_is_read_only(small_data):
    with pytest.raises(ValueError):
        small_data.coords[0, 0] = 1.0
    sample = small_data.samples[4]
    assert len(sample.predictors) == small_data.p


def test_id_column_is_not_a_predictor(tmp_path):
    path = tmp_path / "ids.csv"
    path.write_text("id,u,v,a,b,SA,AC\n" + "".join(
        f"p{i},{i},{i * i % 7},{i % 3},{(i * 5) % 4},{i % 5},{(i * 3) % 7}\n" for i in range(8)))
    d = load_dataset(path)
    assert d.predictor_names == ("a", "b")
    assert d.ids[0] == "p0"
