"""Two-class datasets: synthetic blobs, libsvm-format loading, agent shards."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from decbilevel.numerics import RngStream


@dataclass(frozen=True)
class Dataset:
    """Sample pool: features (n, p) and labels (n,) in {0, 1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        lab = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or lab.ndim != 1 or x.shape[0] != lab.shape[0]:
            raise ValueError(f"inconsistent dataset shapes {x.shape} / {lab.shape}")
        if x.shape[0] == 0:
            raise ValueError("dataset is empty")
        if not np.all((lab == 0) | (lab == 1)):
            raise ValueError("labels must be in {0, 1}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class AgentShard:
    """One agent's 40/40/20 train/validation/test split."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray


def make_synthetic_dataset(n_per_agent: int, p: int, separation: float,
                           s: RngStream, m: int = 1) -> Dataset:
    """Two Gaussian blobs with the given distance between class means.

    Generates m * n_per_agent samples (m defaults to 1; pass the agent count
    when the pool will be sharded). Class means sit at +/- separation/2
    along the normalized all-ones direction with identity covariance.
    """
    if n_per_agent < 2:
        raise ValueError(f"n_per_agent must be >= 2, got {n_per_agent}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if separation < 0:
        raise ValueError(f"separation must be >= 0, got {separation}")
    n = n_per_agent * m
    gen = s.generator
    labels = gen.integers(0, 2, size=n)
    direction = np.ones(p) / np.sqrt(p)
    means = np.where(labels[:, None] == 1, 1.0, -1.0) * (separation / 2.0) * direction
    features = means + gen.standard_normal((n, p))
    return Dataset(features=features, labels=labels)


def load_libsvm(path, p: int | None = None) -> Dataset:
    """Parse sparse 'label idx:val ...' lines (1-indexed features).

    Labels {-1, +1} (or {0, 1}) map to {0, 1}. With p=None the dimension is
    the largest index seen.
    """
    rows = []
    labels = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for ln_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                raw_label = float(parts[0])
            except ValueError as exc:
                raise ValueError(f"{path}:{ln_no}: bad label {parts[0]!r}") from exc
            entries = []
            for tok in parts[1:]:
                idx_str, _, val_str = tok.partition(":")
                try:
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError as exc:
                    raise ValueError(f"{path}:{ln_no}: bad feature token {tok!r}") from exc
                if idx < 1:
                    raise ValueError(f"{path}:{ln_no}: feature index {idx} is not 1-based")
                if p is not None and idx > p:
                    raise ValueError(f"{path}:{ln_no}: feature index {idx} exceeds p={p}")
                max_idx = max(max_idx, idx)
                entries.append((idx, val))
            rows.append(entries)
            labels.append(1 if raw_label > 0 else 0)
    if not rows:
        raise ValueError(f"{path}: no samples")
    dim = p if p is not None else max_idx
    features = np.zeros((len(rows), dim))
    for r, entries in enumerate(rows):
        for idx, val in entries:
            features[r, idx - 1] = val
    return Dataset(features=features, labels=np.array(labels))


def dump_csv(ds: Dataset, path) -> None:
    """Write one sample per row, features first, label last."""
    with open(path, "w", encoding="utf-8") as fh:
        for row, lab in zip(ds.features, ds.labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(lab)}\n")


def shard_dataset(ds: Dataset, m: int) -> list:
    """Split the pool into m equal contiguous shards, each split 40/40/20.

    Raises if any agent's train/validation/test piece would be empty.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    per = ds.n // m
    shards = []
    for i in range(m):
        x = ds.features[i * per:(i + 1) * per]
        lab = ds.labels[i * per:(i + 1) * per]
        n_tr = round(0.4 * per)
        n_val = round(0.4 * per)
        n_te = per - n_tr - n_val
        if min(n_tr, n_val, n_te) < 1:
            raise ValueError(
                f"agent {i} shard of {per} samples leaves an empty 40/40/20 split"
            )
        shards.append(AgentShard(
            x_train=x[:n_tr], y_train=lab[:n_tr],
            x_val=x[n_tr:n_tr + n_val], y_val=lab[n_tr:n_tr + n_val],
            x_test=x[n_tr + n_val:], y_test=lab[n_tr + n_val:],
        ))
    return shards
