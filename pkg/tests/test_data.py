import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scltpe.data import (
    Dataset, augment_two_views, load_csv, load_dataset, load_keel, sample_batch,
    stratified_split, write_csv, zscore_apply, zscore_fit,
)
from scltpe.exceptions import EmptyDatasetError, ParseError

KEEL_SMALL = """@relation tiny
@attribute a real [0.0, 10.0]
@attribute b integer [0, 5]
@attribute class {yes, no}
@inputs a, b
@outputs class
@data
1.5, 2, no
-0.25, 0, yes
3.0, 5, no
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_glass0_counts(glass0):
    assert glass0.n == 214
    assert glass0.d == 9
    counts = dict(zip(glass0.class_names, glass0.class_counts.tolist()))
    assert counts == {"negative": 144, "positive": 70}


def test_keel_hand_parsed(tmp_path):
    ds = load_keel(write(tmp_path, "t.dat", KEEL_SMALL))
    np.testing.assert_array_equal(ds.X, [[1.5, 2.0], [-0.25, 0.0], [3.0, 5.0]])
    assert ds.class_names == ("no", "yes")  # order of first appearance
    assert ds.y.tolist() == [0, 1, 0]


def test_keel_fixed_encoding(tmp_path):
    ds = load_keel(write(tmp_path, "t.dat", KEEL_SMALL), class_names=("yes", "no"))
    assert ds.y.tolist() == [1, 0, 1]


def test_keel_empty_data(tmp_path):
    text = KEEL_SMALL.split("@data")[0] + "@data\n"
    with pytest.raises(EmptyDatasetError):
        load_keel(write(tmp_path, "e.dat", text))


@pytest.mark.parametrize("bad_row,line", [("1.5, x, no", 8), ("1.5, 2, maybe", 8), ("1.5, no", 8)])
def test_keel_bad_rows_report_line(tmp_path, bad_row, line):
    text = KEEL_SMALL.replace("1.5, 2, no", bad_row)
    with pytest.raises(ParseError) as info:
        load_keel(write(tmp_path, "b.dat", text))
    assert info.value.line == line


def test_keel_bad_header(tmp_path):
    with pytest.raises(ParseError) as info:
        load_keel(write(tmp_path, "h.dat", KEEL_SMALL.replace("integer", "string")))
    assert info.value.line == 3
    with pytest.raises(ParseError):
        load_keel(write(tmp_path, "h2.dat", KEEL_SMALL.replace("@relation tiny\n", "")))


def test_csv_hand_parsed(tmp_path):
    p = write(tmp_path, "t.csv", "f1,f2,label\n1,2,a\n3,4,b\n5,6,a\n7.5,-8,b\n")
    ds = load_csv(p)
    np.testing.assert_array_equal(ds.X, [[1, 2], [3, 4], [5, 6], [7.5, -8]])
    assert ds.y.tolist() == [0, 1, 0, 1] and ds.class_names == ("a", "b")
    ds2 = load_csv(write(tmp_path, "u.csv", "label,f1\na,1\nb,2\n"), label_column="label")
    np.testing.assert_array_equal(ds2.X, [[1], [2]])


def test_csv_single_class_warns(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        ds = load_csv(write(tmp_path, "one.csv", "f,c\n1,a\n2,a\n"))
    assert ds.n_classes == 1
    assert "one class" in caplog.text


def test_csv_missing_value_names_row_and_column(tmp_path):
    with pytest.raises(ParseError) as info:
        load_csv(write(tmp_path, "m.csv", "f1,f2,c\n1,2,a\n3,,b\n"))
    assert info.value.line == 3
    assert "f2" in str(info.value)


def test_csv_roundtrip_bit_exact(tmp_path, glass0):
    rng = np.random.default_rng(0)
    ds = glass0.with_features(glass0.X + rng.normal(size=glass0.X.shape) * 1e-7)
    write_csv(ds, tmp_path / "g.csv")
    back = load_dataset(tmp_path / "g.csv", class_names=ds.class_names)
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.y, ds.y)


def test_zscore_examples():
    ds = Dataset(np.array([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]), [0, 1, 0], ("a", "b"))
    out = zscore_apply(zscore_fit(ds), ds)
    np.testing.assert_allclose(out.X[:, 0], [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)
    np.testing.assert_array_equal(out.X[:, 1], 0.0)  # constant column, clamped std
    again = zscore_apply(zscore_fit(out), out)
    np.testing.assert_allclose(again.X, out.X, atol=1e-12)


def test_zscore_moments(glass0):
    out = zscore_apply(zscore_fit(glass0), glass0)
    assert np.all(np.abs(out.X.mean(axis=0)) < 1e-10)
    assert np.all(np.abs(out.X.std(axis=0) - 1.0) < 1e-10)


def test_glass0_split_counts(glass0):
    train, test = stratified_split(glass0, 0.2, 0)
    by_name = lambda ds: dict(zip(ds.class_names, ds.class_counts.tolist()))
    assert by_name(test) == {"negative": 29, "positive": 14}
    assert by_name(train) == {"negative": 115, "positive": 56}


def test_split_balanced_half():
    ds = Dataset(np.arange(20.0)[:, None], [0] * 10 + [1] * 10, ("a", "b"))
    train, test = stratified_split(ds, 0.5, 3)
    assert train.class_counts.tolist() == [5, 5] and test.class_counts.tolist() == [5, 5]


def test_split_deterministic_and_disjoint(glass0):
    a = stratified_split(glass0, 0.2, 7)
    b = stratified_split(glass0, 0.2, 7)
    assert np.array_equal(a[1].X, b[1].X)
    rows = {tuple(r) for r in a[0].X} | {tuple(r) for r in a[1].X}
    assert a[0].n + a[1].n == glass0.n
    assert len(rows) == len({tuple(r) for r in glass0.X})


def test_split_singleton_class_stays_in_train(caplog):
    ds = Dataset(np.arange(6.0)[:, None], [0, 0, 0, 0, 0, 1], ("a", "b"))
    with caplog.at_level(logging.WARNING):
        train, test = stratified_split(ds, 0.2, 0)
    assert train.class_counts[1] == 1 and test.class_counts[1] == 0
    assert "one member" in caplog.text


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=2, max_size=5), st.floats(0.05, 0.95), st.integers(0, 99))
def test_split_preserves_proportions(counts, frac, seed):
    y = np.concatenate([np.full(c, k) for k, c in enumerate(counts)]).astype(int)
    if y.size == 0:
        return
    ds = Dataset(np.zeros((y.size, 1)), y, tuple(str(k) for k in range(len(counts))))
    train, test = stratified_split(ds, frac, seed)
    for k, c in enumerate(counts):
        t = test.class_counts[k]
        assert t + train.class_counts[k] == c
        if c >= 2:
            assert 1 <= t <= c - 1
            assert abs(t - c * frac) <= 1
        else:
            assert t == 0


def test_sample_batch(glass0):
    train, _ = stratified_split(glass0, 0.2, 0)
    assert train.n == 171
    idx = sample_batch(train, 160, np.random.default_rng(0))
    assert idx.shape == (160,) and idx.min() >= 0 and idx.max() < 171
    assert np.array_equal(idx, sample_batch(train, 160, np.random.default_rng(0)))
    with pytest.raises(ValueError):
        sample_batch(train, 1, np.random.default_rng(0))


def test_augment_structure(blobs):
    b = augment_two_views(blobs, [4, 0, 35], 0.0, np.random.default_rng(0))
    assert b.X.shape == (6, blobs.d)
    np.testing.assert_array_equal(b.X[0], blobs.X[4])
    np.testing.assert_array_equal(b.X[0], b.X[1])
    assert b.y.tolist() == [0, 0, 0, 0, 1, 1]
    assert np.bincount(b.source).tolist() == [2, 2, 2]
    assert b.pair_map.tolist() == [1, 0, 3, 2, 5, 4]


def test_augment_noise_variance():
    ds = Dataset(np.zeros((1, 4)), [0], ("a",))
    sigma = 0.3
    b = augment_two_views(ds, np.zeros(12500, dtype=int), sigma, np.random.default_rng(0))
    var = b.X.var()  # 10^5 draws
    assert abs(var / sigma**2 - 1.0) < 0.05
    assert not np.array_equal(b.X[0], b.X[1])
