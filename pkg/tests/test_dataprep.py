import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoaudit.adult import ADULT_SCHEMA, DEFAULT_FEATURES, load_adult
from geoaudit.dataprep import (
    ColumnSpec,
    FeatureSchema,
    RawTable,
    drop_features,
    encode_split,
    encode_standardize,
    gen_xor_shortcut,
    load_table,
    resolve_features,
    split,
    split_table,
    used_columns,
)
from geoaudit.errors import DataError

from conftest import ADULT_DATA, make_matrix

TOY = FeatureSchema(
    columns=(
        ColumnSpec("age", "numeric"),
        ColumnSpec("color", "categorical", ("red", "green", "blue")),
    ),
    target_column="label",
    positive_label="yes",
)


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- load_table ---------------------------------------------------------------------


def test_load_three_rows(tmp_path):
    p = write(tmp_path, "30, red, yes\n40, blue, no\n\n| comment\n50, green, yes.\n")
    raw = load_table(p, TOY)
    assert len(raw) == 3 and raw.dropped == 0
    assert raw.rows[0] == ("30", "red", "yes")


def test_load_drops_missing(tmp_path):
    p = write(tmp_path, "30, ?, yes\n40, blue, no\n?, red, no\n")
    raw = load_table(p, TOY)
    assert len(raw) == 1 and raw.dropped == 2
    # A "?" in an unused column is kept.
    raw = load_table(p, TOY, used_columns=["age"])
    assert len(raw) == 2 and raw.dropped == 1


def test_load_header(tmp_path):
    p = write(tmp_path, "age,color,label\n30, red, yes\n")
    assert len(load_table(p, TOY, has_header=True)) == 1


def test_load_wrong_field_count_reports_line(tmp_path):
    p = write(tmp_path, "30, red, yes\n40, blue\n")
    with pytest.raises(DataError, match=":2:"):
        load_table(p, TOY)


def test_load_unknown_category(tmp_path):
    p = write(tmp_path, "30, purple, yes\n")
    with pytest.raises(DataError, match="purple"):
        load_table(p, TOY)


def _text_missing_counts(path, columns):
    """Independent count of records with '?' in the given column positions."""
    any_missing = selected = total = 0
    with open(path) as fh:
        for line in fh:
            parts = [v.strip() for v in line.split(",")]
            if len(parts) != 15:
                continue
            total += 1
            any_missing += "?" in parts
            selected += any(parts[i] == "?" for i in columns)
    return total, any_missing, selected


def test_adult_missing_counts():
    wc, occ = ADULT_SCHEMA.field_index("workclass"), ADULT_SCHEMA.field_index("occupation")
    total, any_missing, wc_occ = _text_missing_counts(ADULT_DATA, [wc, occ])
    assert total == 32561
    full = load_table(ADULT_DATA, ADULT_SCHEMA)
    assert full.dropped == any_missing == 2399
    assert len(full) == total - any_missing
    part = load_table(ADULT_DATA, ADULT_SCHEMA, used_columns=["workclass", "occupation"])
    assert part.dropped == wc_occ == 1843


# -- encoding -----------------------------------------------------------------------


def test_encode_standardize_example():
    raw = RawTable((("1", "red", "yes"), ("2", "green", "no"), ("3", "blue", "no")))
    m = encode_standardize(raw, TOY, ["age", "color"])
    assert m.feature_names == ("age", "color=red", "color=green", "color=blue")
    np.testing.assert_allclose(m.column("age"), [-1.224745, 0.0, 1.224745], atol=1e-6)
    np.testing.assert_array_equal(m.features[:, 1:], np.eye(3))
    np.testing.assert_array_equal(m.targets, [1, 0, 0])
    assert m.standardization["age"] == pytest.approx((2.0, statistics.pstdev([1, 2, 3])))


def test_encode_constant_column_is_finite():
    raw = RawTable((("5", "red", "yes"), ("5", "red", "no")))
    m = encode_standardize(raw, TOY, ["age"])
    assert np.all(m.column("age") == 0.0)


def test_encode_uses_supplied_stats():
    raw = RawTable((("10", "red", "yes"),))
    m = encode_standardize(raw, TOY, ["age"], stats={"age": (0.0, 5.0)})
    assert m.column("age")[0] == 2.0


def test_encode_empty_raises():
    with pytest.raises(DataError):
        encode_standardize(RawTable(()), TOY, ["age"])


def test_resolve_features():
    assert resolve_features(TOY, ["color=blue", "age"]) == [("color", "blue"), ("age", None)]
    assert used_columns(TOY, ["color=blue", "color=red", "age"]) == ["color", "age"]
    for bad in (["weight"], ["age=3"], ["color=purple"], [], ["age", "age"]):
        with pytest.raises(DataError):
            resolve_features(TOY, bad)


def test_adult_capital_gain_stats_match_oracle():
    raw = load_table(ADULT_DATA, ADULT_SCHEMA, used_columns=["capital-gain"])
    assert raw.dropped == 0
    m = encode_standardize(raw, ADULT_SCHEMA, ["capital-gain"])
    idx = ADULT_SCHEMA.field_index("capital-gain")
    values = [float(r[idx]) for r in raw.rows]
    mean, std = m.standardization["capital-gain"]
    assert mean == pytest.approx(statistics.fmean(values), rel=1e-12)
    assert std == pytest.approx(statistics.pstdev(values), rel=1e-9)
    assert mean == pytest.approx(1077.6, abs=0.1)
    # Population std; the sample std of the same column is the commonly quoted 7385.3.
    assert std == pytest.approx(7385.18, abs=0.01)
    assert statistics.stdev(values) == pytest.approx(7385.3, abs=0.1)
    assert (99999 - mean) / std == pytest.approx(13.39, abs=0.005)


def test_adult_default_encoding(adult_split):
    tr, te = adult_split.train, adult_split.test
    assert tr.n_features == 9 and tr.feature_names == DEFAULT_FEATURES
    # Only workclass among the used columns has missing values.
    _, _, wc_missing = _text_missing_counts(ADULT_DATA, [ADULT_SCHEMA.field_index("workclass")])
    kept = 32561 - wc_missing
    assert tr.n_rows + te.n_rows == kept
    assert tr.n_rows == int(0.8 * kept)
    assert te.standardization == tr.standardization
    np.testing.assert_allclose(tr.column("age").mean(), 0.0, atol=1e-9)
    np.testing.assert_allclose(tr.column("age").std(), 1.0, atol=1e-9)
    assert 0.2 < tr.targets.mean() < 0.3


def test_adult_explicit_test_file():
    from conftest import ADULT_TEST

    pair = load_adult(ADULT_DATA, ["age", "sex"], test_path=ADULT_TEST)
    assert pair.test.n_rows > 16000
    # Labels in the test file carry a trailing period.
    assert 0.2 < pair.test.targets.mean() < 0.3


# -- splitting and pruning -----------------------------------------------------------


def _toy(n=10, d=3):
    rng = np.random.default_rng(0)
    return make_matrix(rng.normal(size=(n, d)), np.arange(n) % 2)


def test_split_example():
    pair = split(_toy(10), 0.8, seed=0)
    assert (pair.train.n_rows, pair.test.n_rows) == (8, 2)
    again = split(_toy(10), 0.8, seed=0)
    assert pair.train.same_as(again.train) and pair.test.same_as(again.test)


def test_split_degenerate():
    with pytest.raises(DataError):
        split(_toy(2), 0.4, 0)
    with pytest.raises(ValueError):
        split(_toy(10), 1.0, 0)


def test_split_table_matches_split():
    raw = RawTable(tuple((str(i), "red", "yes" if i % 2 else "no") for i in range(20)))
    m = encode_standardize(raw, TOY, ["age"])
    tr_raw, te_raw = split_table(raw, 0.7, 4)
    pair = split(m, 0.7, 4)
    assert [r[0] for r in tr_raw.rows] == [str(int(round(v))) for v in pair.train.column("age") * m.standardization["age"][1] + 9.5]
    assert len(te_raw) == pair.test.n_rows


def test_encode_split_uses_train_stats():
    raw = RawTable(tuple((str(i), "red", "no") for i in range(10)))
    tr, te = split_table(raw, 0.5, 0)
    pair = encode_split(tr, te, TOY, ["age"])
    assert pair.test.standardization == pair.train.standardization


def test_drop_features_example():
    m = _toy()
    out = drop_features(m, {"f1"})
    assert out.feature_names == ("f0", "f2")
    np.testing.assert_array_equal(out.features, m.features[:, [0, 2]])
    assert drop_features(m, set()) is m
    with pytest.raises(KeyError):
        drop_features(m, {"nope"})
    with pytest.raises(DataError):
        drop_features(m, {"f0", "f1", "f2"})


def test_matrix_is_immutable():
    m = _toy()
    with pytest.raises(ValueError):
        m.features[0, 0] = 1.0


@given(st.sets(st.sampled_from(["f0", "f1", "f2", "f3"]), max_size=3),
       st.sets(st.sampled_from(["f0", "f1", "f2", "f3"]), max_size=3))
def test_drop_commutes(a, b):
    if len(a | b) == 4:
        return
    m = _toy(d=4)
    left = drop_features(drop_features(m, a), b - a)
    right = drop_features(drop_features(m, b), a - b)
    assert left.same_as(right)
    assert left.same_as(drop_features(m, a | b))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from(["red", "green", "blue"]), min_size=2, max_size=30))
def test_one_hot_rows_sum_to_one(colors):
    raw = RawTable(tuple(("1", c, "no") for c in colors))
    m = encode_standardize(raw, TOY, ["color"])
    np.testing.assert_array_equal(m.features.sum(axis=1), np.ones(len(colors)))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40), st.integers(0, 1000))
def test_encoding_round_trip(ages, seed):
    raw = RawTable(tuple((repr(a), "red", "no") for a in ages))
    m = encode_standardize(raw, TOY, ["age"])
    mean, std = m.standardization["age"]
    np.testing.assert_allclose(m.column("age") * std + mean, ages, rtol=1e-9, atol=1e-6 * max(1.0, std))
    assert encode_standardize(raw, TOY, ["age"]).same_as(m)


# -- synthetic generator -------------------------------------------------------------


def test_xor_generator_noiseless():
    m = gen_xor_shortcut(2000, 1.0, 0.0, seed=0)
    assert m.feature_names == ("x1", "x2", "shortcut")
    s = np.sign(m.column("x1")) * np.sign(m.column("x2"))
    np.testing.assert_array_equal(m.targets, (s < 0).astype(int))
    np.testing.assert_array_equal(np.sign(m.column("shortcut")) > 0, m.targets == 1)
    np.testing.assert_allclose(m.features.mean(axis=0), 0.0, atol=1e-12)
    assert set(m.standardization) == {"x1", "x2", "shortcut"}


@pytest.mark.parametrize("rate", [0.5, 0.75, 0.9])
def test_xor_leak_rate(rate):
    m = gen_xor_shortcut(20000, rate, 0.0, seed=1)
    agree = np.mean((m.column("shortcut") > 0) == (m.targets == 1))
    assert agree == pytest.approx(rate, abs=0.015)


def test_xor_generator_validation():
    with pytest.raises(ValueError):
        gen_xor_shortcut(3, 1.0)
    with pytest.raises(ValueError):
        gen_xor_shortcut(100, 0.3)
    with pytest.raises(ValueError):
        gen_xor_shortcut(100, 1.0, -1.0)


def test_xor_labels_balanced():
    m = gen_xor_shortcut(10000, 1.0, 0.2, seed=3)
    assert m.targets.mean() == pytest.approx(0.5, abs=0.02)
