"""Generated datasets for benchmarks and tests."""

from __future__ import annotations

import numpy as np

from .dataset import WarningDataset


def bumpy(n: int = 200, minority: float = 0.4, spread: float = 0.18, flip: float = 0.1,
          seed: int = 7, project: str = "bumpy") -> WarningDataset:
    """Two-feature XOR of Gaussian blobs with some labels flipped.

    Positives (the ``minority`` share) sit around (0,0) and (1,1),
    negatives around (0,1) and (1,0). ``flip`` of the rows get the wrong
    label, giving the noisy, many-minima landscape the treatments target.
    Timestamps are a random permutation, so time splits are i.i.d.
    """
    rng = np.random.default_rng(seed)
    n_pos = int(round(n * minority))
    labels = np.r_[np.ones(n_pos, dtype=np.int64), np.zeros(n - n_pos, dtype=np.int64)]
    corner = rng.integers(0, 2, size=n)
    centres = np.where(labels[:, None] == 1,
                       np.c_[corner, corner],
                       np.c_[corner, 1 - corner]).astype(np.float64)
    X = centres + rng.normal(0.0, spread, size=(n, 2))
    noisy = rng.random(n) < flip
    labels = np.where(noisy, 1 - labels, labels)
    stamps = rng.permutation(n).astype(np.int64) + 1_600_000_000
    return WarningDataset(project, X, ("f0", "f1"), labels, stamps)


def blobs(n: int = 100, d: int = 2, gap: float = 3.0, seed: int = 0, minority: float = 0.5,
          project: str = "blobs") -> WarningDataset:
    """Two well separated Gaussian blobs, one per class."""
    rng = np.random.default_rng(seed)
    n_pos = int(round(n * minority))
    labels = np.r_[np.ones(n_pos, dtype=np.int64), np.zeros(n - n_pos, dtype=np.int64)]
    X = rng.normal(0.0, 1.0, size=(n, d)) + gap * labels[:, None]
    return WarningDataset(project, X, tuple(f"f{i}" for i in range(d)), labels, np.arange(n))


def random_dataset(n: int, d: int, seed: int = 0, minority: float = 0.3, project: str = "random") -> WarningDataset:
    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < minority).astype(np.int64)
    return WarningDataset(project, rng.random((n, d)), tuple(f"f{i}" for i in range(d)), labels,
                          rng.integers(0, 10 * n, size=n))
