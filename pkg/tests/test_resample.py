import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_blobs
from scltpe.data import Dataset
from scltpe.resample import (
    SamplerConfig, knn_predict, knn_proba, resample, ros, rus, smote, smote_with_pairs,
)


def counts_by_name(ds):
    return dict(zip(ds.class_names, ds.class_counts.tolist()))


def test_glass0_counts(glass0):
    assert counts_by_name(ros(glass0, 0)) == {"negative": 144, "positive": 144}
    assert counts_by_name(rus(glass0, 0)) == {"negative": 70, "positive": 70}
    out, pairs = smote_with_pairs(glass0, 5, 0)
    assert counts_by_name(out) == {"negative": 144, "positive": 144}
    assert pairs.shape == (74, 3)


def test_balanced_input_unchanged():
    ds = make_blobs((10, 10))
    for sampler in (ros, rus, smote):
        out = sampler(ds, seed=0)
        assert out.class_counts.tolist() == [10, 10]


def test_ros_duplicates_existing_rows():
    ds = make_blobs((12, 4))
    out = ros(ds, 1)
    np.testing.assert_array_equal(out.X[: ds.n], ds.X)
    rows = {tuple(r) for r in ds.X}
    assert all(tuple(r) in rows for r in out.X)


def test_rus_is_subset():
    ds = make_blobs((12, 4))
    out = rus(ds, 1)
    rows = {tuple(r) for r in ds.X}
    assert all(tuple(r) in rows for r in out.X)
    assert len({tuple(r) for r in out.X}) == out.n  # no repeats


def test_smote_midpoint():
    ds = Dataset(np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0], [6.0, 5.0], [5.0, 6.0]]),
                 [1, 1, 0, 0, 0], ("maj", "min"))
    out, pairs = smote_with_pairs(ds, k=1, seed=0)
    assert out.n == 6
    src, nn, lam = int(pairs[0, 0]), int(pairs[0, 1]), pairs[0, 2]
    assert {src, nn} == {0, 1}
    np.testing.assert_allclose(out.X[-1], ds.X[src] + lam * (ds.X[nn] - ds.X[src]))
    # with lambda = 0.5 the formula gives the midpoint
    np.testing.assert_allclose(ds.X[src] + 0.5 * (ds.X[nn] - ds.X[src]), [0.5, 0.5])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(1, 25), min_size=2, max_size=4), st.integers(1, 7))
def test_sampler_geometry_and_balance(seed, counts, k):
    rng = np.random.default_rng(seed)
    y = np.concatenate([np.full(c, i) for i, c in enumerate(counts)])
    ds = Dataset(rng.normal(size=(y.size, 3)), y, tuple(map(str, range(len(counts)))))
    out, pairs = smote_with_pairs(ds, k, seed)
    assert set(out.class_counts.tolist()) == {max(counts)}
    synth = out.X[ds.n:]
    assert synth.shape[0] == pairs.shape[0]
    for x, (a, b, lam) in zip(synth, pairs):
        a, b = int(a), int(b)
        assert ds.y[a] == ds.y[b]
        assert np.all(np.minimum(ds.X[a], ds.X[b]) <= x) and np.all(x <= np.maximum(ds.X[a], ds.X[b]))
        assert 0.0 <= lam <= 1.0
    assert set(ros(ds, seed).class_counts.tolist()) == {max(counts)}
    assert set(rus(ds, seed).class_counts.tolist()) == {min(counts)}


def test_smote_singleton_falls_back_to_duplication(caplog):
    ds = Dataset(np.array([[0.0], [1.0], [2.0], [9.0]]), [0, 0, 0, 1], ("a", "b"))
    with caplog.at_level(logging.WARNING):
        out = smote(ds, 5, 0)
    assert out.class_counts.tolist() == [3, 3]
    np.testing.assert_array_equal(out.X[out.y == 1], 9.0)
    assert "one member" in caplog.text


def test_determinism(glass0):
    for kind in ("ros", "rus", "smote"):
        a = resample(glass0, SamplerConfig(kind, seed=3))
        b = resample(glass0, SamplerConfig(kind, seed=3))
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert resample(glass0, SamplerConfig("none")) is glass0


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig("adasyn")
    with pytest.raises(ValueError):
        SamplerConfig("smote", k_neighbors=0)


def test_knn_exact_match_and_xor():
    xor = Dataset(np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]), [0, 0, 1, 1], ("a", "b"))
    labels, proba = knn_predict(xor, xor.X, k=1)
    assert labels.tolist() == [0, 0, 1, 1]
    np.testing.assert_array_equal(proba, np.eye(2)[[0, 0, 1, 1]])
    labels, _ = knn_predict(xor, [[0.9, 0.1]], k=1)
    assert labels.tolist() == [1]


def test_knn_full_k_is_global_majority():
    ds = make_blobs((7, 3))
    labels, proba = knn_predict(ds, np.random.default_rng(0).normal(size=(20, 3)) * 10, k=ds.n)
    assert labels.tolist() == [0] * 20
    np.testing.assert_allclose(proba, [[0.7, 0.3]] * 20)


def test_knn_tie_goes_to_lowest_class():
    ds = Dataset(np.array([[-1.0], [1.0]]), [1, 0], ("a", "b"))
    labels, proba = knn_predict(ds, [[0.0]], k=2)
    assert labels.tolist() == [0] and proba.tolist() == [[0.5, 0.5]]
    with pytest.raises(ValueError):
        knn_proba(ds, [[0.0]], k=3)
