"""Tests for dataset generation, libsvm parsing, and agent sharding."""

import numpy as np
import pytest

from decbilevel.numerics import RngStream
from decbilevel.problems import Dataset, dump_csv, load_libsvm, make_synthetic_dataset
from decbilevel.problems.datasets import shard_dataset


def test_synthetic_shapes_and_determinism():
    ds1 = make_synthetic_dataset(50, 7, 2.0, RngStream(3, ("d",)), m=4)
    ds2 = make_synthetic_dataset(50, 7, 2.0, RngStream(3, ("d",)), m=4)
    assert ds1.n == 200 and ds1.p == 7
    assert np.array_equal(ds1.features, ds2.features)
    assert np.array_equal(ds1.labels, ds2.labels)
    assert set(np.unique(ds1.labels)) <= {0, 1}


def test_synthetic_validation():
    with pytest.raises(ValueError):
        make_synthetic_dataset(1, 3, 1.0, RngStream(0))
    with pytest.raises(ValueError):
        make_synthetic_dataset(10, 0, 1.0, RngStream(0))
    with pytest.raises(ValueError):
        make_synthetic_dataset(10, 3, -1.0, RngStream(0))


def test_zero_separation_is_chance_level():
    # With identical class distributions no classifier can beat 0.5; check
    # the class-mean rule on a held-out piece.
    ds = make_synthetic_dataset(10**4, 4, 0.0, RngStream(7, ("bayes",)))
    half = ds.n // 2
    mu1 = ds.features[:half][ds.labels[:half] == 1].mean(axis=0)
    mu0 = ds.features[:half][ds.labels[:half] == 0].mean(axis=0)
    scores = ds.features[half:] @ (mu1 - mu0)
    pred = (scores > float(scores.mean())).astype(int)
    acc = float(np.mean(pred == ds.labels[half:]))
    assert abs(acc - 0.5) <= 0.05


def test_separated_blobs_are_separable():
    ds = make_synthetic_dataset(2000, 4, 6.0, RngStream(8, ("sep",)))
    direction = np.ones(4) / 2.0
    pred = (ds.features @ direction > 0).astype(int)
    assert float(np.mean(pred == ds.labels)) >= 0.95


def test_libsvm_basic_line(tmp_path):
    f = tmp_path / "toy.libsvm"
    f.write_text("1 3:0.5\n-1 1:2.0 4:-1.5\n")
    ds = load_libsvm(f, p=4)
    assert ds.features.shape == (2, 4)
    assert np.array_equal(ds.features[0], [0.0, 0.0, 0.5, 0.0])
    assert np.array_equal(ds.features[1], [2.0, 0.0, 0.0, -1.5])
    assert list(ds.labels) == [1, 0]


def test_libsvm_infers_dimension(tmp_path):
    f = tmp_path / "toy.libsvm"
    f.write_text("+1 2:1.0\n-1 5:3.0\n")
    ds = load_libsvm(f)
    assert ds.p == 5


def test_libsvm_a9a_style_dimension(tmp_path):
    rng = np.random.default_rng(0)
    lines = []
    for _ in range(30):
        label = rng.choice(["+1", "-1"])
        idxs = sorted(rng.choice(np.arange(1, 124), size=12, replace=False))
        lines.append(label + " " + " ".join(f"{i}:1" for i in idxs))
    f = tmp_path / "a9a.mini"
    f.write_text("\n".join(lines) + "\n")
    ds = load_libsvm(f, p=123)
    assert ds.p == 123 and ds.n == 30


def test_libsvm_errors_name_line(tmp_path):
    f = tmp_path / "bad.libsvm"
    f.write_text("1 2:0.5\nnotalabel 1:1\n")
    with pytest.raises(ValueError, match=":2:"):
        load_libsvm(f)
    f2 = tmp_path / "bad2.libsvm"
    f2.write_text("1 0:0.5\n")
    with pytest.raises(ValueError, match="1-based"):
        load_libsvm(f2)
    f3 = tmp_path / "bad3.libsvm"
    f3.write_text("1 7:0.5\n")
    with pytest.raises(ValueError, match="exceeds"):
        load_libsvm(f3, p=4)
    f4 = tmp_path / "empty.libsvm"
    f4.write_text("\n")
    with pytest.raises(ValueError, match="no samples"):
        load_libsvm(f4)


def test_dump_csv_label_last(tmp_path):
    ds = Dataset(features=np.array([[1.5, -2.0], [0.0, 3.25]]),
                 labels=np.array([1, 0]))
    path = tmp_path / "dump.csv"
    dump_csv(ds, path)
    rows = [ln.split(",") for ln in path.read_text().strip().splitlines()]
    assert float(rows[0][-1]) == 1 and float(rows[1][-1]) == 0
    back = np.array([[float(v) for v in row[:-1]] for row in rows])
    assert np.allclose(back, ds.features, atol=0)


def test_shard_split_fractions():
    ds = make_synthetic_dataset(10, 3, 1.0, RngStream(0), m=3)
    shards = shard_dataset(ds, 3)
    assert len(shards) == 3
    for sh in shards:
        assert len(sh.y_train) == 4 and len(sh.y_val) == 4 and len(sh.y_test) == 2
    # Contiguous coverage of the pool.
    rebuilt = np.vstack([np.vstack([sh.x_train, sh.x_val, sh.x_test]) for sh in shards])
    assert np.array_equal(rebuilt, ds.features)


def test_shard_rejects_empty_pieces():
    ds = make_synthetic_dataset(4, 2, 1.0, RngStream(0))
    with pytest.raises(ValueError):
        shard_dataset(ds, 1)
    with pytest.raises(ValueError):
        shard_dataset(ds, 0)
