import gzip

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from tagi.data import (
    DataError,
    Dataset,
    NormStats,
    Normalizer,
    data_dir,
    kfold,
    load_csv,
    load_mnist_idx,
    make_toy_cubic,
    read_idx_images,
    read_idx_labels,
    write_idx,
)


def test_csv_with_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b,y\n1,2,3\n4,5,6\n")
    ds = load_csv(p)
    np.testing.assert_array_equal(ds.x, [[1, 2], [4, 5]])
    np.testing.assert_array_equal(ds.y, [[3], [6]])
    assert ds.feature_names == ["a", "b"] and ds.target_names == ["y"]


def test_csv_target_by_name_and_dropped_column(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,y,junk,b\n1,2,9,3\n4,5,9,6\n")
    ds = load_csv(p, ["y"], drop_columns=["junk"])
    np.testing.assert_array_equal(ds.x, [[1, 3], [4, 6]])
    np.testing.assert_array_equal(ds.y[:, 0], [2, 5])


def test_whitespace_without_header(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("1 2 3\n4 5 6\n\n")
    ds = load_csv(p, [0])
    np.testing.assert_array_equal(ds.y[:, 0], [1, 4])
    assert ds.feature_names == ["c1", "c2"]


@pytest.mark.parametrize("body,match", [
    ("a,b\n1,2\n3\n", "expected 2 columns"),
    ("a,b\n1,x\n", "not numeric"),
    ("a,b\n1,nan\n", "non-finite"),
    ("", "empty"),
])
def test_csv_errors(tmp_path, body, match):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(DataError, match=match):
        load_csv(p)


def test_csv_missing_file_and_bad_target(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        load_csv(p, ["zzz"])
    with pytest.raises(DataError):
        load_csv(p, [5])


def test_idx_roundtrip(tmp_path, rng):
    images = rng.integers(0, 256, (7, 4, 3), dtype=np.uint8)
    labels = rng.integers(0, 10, 7, dtype=np.uint8)
    write_idx(tmp_path / "i", tmp_path / "l", images, labels)
    np.testing.assert_array_equal(read_idx_images(tmp_path / "i"), images)
    np.testing.assert_array_equal(read_idx_labels(tmp_path / "l"), labels)
    ds = load_mnist_idx(tmp_path / "i", tmp_path / "l")
    assert ds.x.shape == (7, 12) and ds.x.max() <= 1.0
    np.testing.assert_allclose(ds.x[0], images[0].ravel() / 255.0)


def test_idx_gzip_fallback(tmp_path):
    write_idx(tmp_path / "i", tmp_path / "l", np.zeros((2, 2, 2)), np.array([1, 2]))
    for name in ("i", "l"):
        raw = (tmp_path / name).read_bytes()
        (tmp_path / name).unlink()
        with gzip.open(tmp_path / f"{name}.gz", "wb") as f:
            f.write(raw)
    assert load_mnist_idx(tmp_path / "i", tmp_path / "l").y.tolist() == [1, 2]


def test_idx_errors(tmp_path):
    write_idx(tmp_path / "i", tmp_path / "l", np.zeros((2, 2, 2)), np.array([1, 12]))
    with pytest.raises(DataError, match="label"):
        load_mnist_idx(tmp_path / "i", tmp_path / "l")
    with pytest.raises(DataError, match="magic"):
        read_idx_labels(tmp_path / "i")
    raw = (tmp_path / "i").read_bytes()
    (tmp_path / "i").write_bytes(raw[:-1])
    with pytest.raises(DataError, match="expected"):
        read_idx_images(tmp_path / "i")
    (tmp_path / "i").write_bytes(raw[:5])
    with pytest.raises(DataError, match="truncated"):
        read_idx_images(tmp_path / "i")


def test_kfold_partitions():
    splits = kfold(23, 5, seed=1)
    tests = np.concatenate([s.test for s in splits])
    assert sorted(tests.tolist()) == list(range(23))
    for s in splits:
        assert len(np.intersect1d(s.train, s.test)) == 0
        assert len(s.train) + len(s.test) == 23


def test_kfold_repeated_holdout():
    a = kfold(100, 4, seed=3, test_size=10)
    b = kfold(100, 4, seed=3, test_size=10)
    assert all(len(s.test) == 10 and len(s.train) == 90 for s in a)
    assert all(np.array_equal(s.test, t.test) for s, t in zip(a, b))
    with pytest.raises(ValueError):
        kfold(3, 5)


@given(arrays(float, (6, 3), elements=st.floats(-1e3, 1e3)), st.sampled_from(["standard", "range", "none"]))
def test_normalisation_roundtrip(a, mode):
    stats = NormStats.fit(a, mode)
    back = stats.denormalize(stats.normalize(a))
    np.testing.assert_allclose(back, a, rtol=1e-12, atol=1e-12 * (1 + np.abs(a).max()))


def test_normalisation_modes():
    a = np.array([[0.0, 5.0], [2.0, 5.0], [4.0, 5.0]])
    r = NormStats.fit(a, "range").normalize(a)
    np.testing.assert_allclose(r[:, 0], [-1, 0, 1])
    np.testing.assert_allclose(r[:, 1], 0)  # constant column
    s = NormStats.fit(a).normalize(a)
    assert s[:, 0].std() == pytest.approx(1.0)
    assert NormStats.fit(a, "range").denormalize_var(np.array([1.0, 1.0]))[0] == 4.0
    with pytest.raises(ValueError):
        NormStats.fit(a, "zscore")


def test_normalizer_keeps_labels():
    ds = Dataset(np.arange(6.0).reshape(3, 2), np.array([0, 1, 2]))
    out = Normalizer.fit(ds, normalize_y=False).apply(ds)
    assert out.y.tolist() == [0, 1, 2]


def test_toy_cubic():
    ds = make_toy_cubic(20, rng_seed=4)
    assert ds.x.shape == (20, 1) and np.all(np.abs(ds.x) <= 4)
    exact = make_toy_cubic(50, noise_std=0.0, rng_seed=4)
    np.testing.assert_allclose(exact.y, exact.x**3)
    np.testing.assert_array_equal(make_toy_cubic(20, rng_seed=4).y, ds.y)


def test_dataset_length_mismatch():
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 2)), np.zeros(2))


def test_bundled_boston_shape():
    path = data_dir() / "boston.csv"
    if not path.exists():
        pytest.skip("bundled data not present")
    ds = load_csv(path, ["medv"])
    assert ds.x.shape == (506, 13) and ds.y.shape == (506, 1)
