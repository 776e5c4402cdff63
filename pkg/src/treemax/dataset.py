"""Dense-vector ground sets: loading, normalization, synthesis, subsampling.

Every objective indexes items by their position in a :class:`Dataset`;
ids are always the contiguous range ``0..n-1`` and never change after
construction.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np


class DatasetError(ValueError):
    """Raised when a ground set cannot be built from the given input."""


class Dataset:
    """Immutable n x d matrix of item vectors with contiguous integer ids.

    Args:
        vectors: array-like of shape (n, d); rows are items.
        source_ids: optional mapping from local ids to the ids of an
            originating dataset (kept by :func:`subsample`).
    """

    def __init__(self, vectors, source_ids: Optional[np.ndarray] = None):
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.ndim != 2:
            raise DatasetError(f"expected a 2-D matrix, got shape {arr.shape}")
        n, d = arr.shape
        if n < 1 or d < 1:
            raise DatasetError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        bad = ~np.isfinite(arr)
        if bad.any():
            row = int(np.argwhere(bad)[0, 0])
            raise DatasetError(f"non-finite value in row {row}")
        arr = arr.copy()
        arr.setflags(write=False)
        self._vectors = arr
        if source_ids is not None:
            source_ids = np.asarray(source_ids, dtype=np.int64).copy()
            if source_ids.shape != (n,):
                raise DatasetError("source_ids must have one entry per row")
            source_ids.setflags(write=False)
        self._source_ids = source_ids

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def n(self) -> int:
        return self._vectors.shape[0]

    @property
    def d(self) -> int:
        return self._vectors.shape[1]

    @property
    def ids(self) -> np.ndarray:
        """Item ids, always the contiguous range 0..n-1."""
        return np.arange(self.n)

    @property
    def source_ids(self) -> Optional[np.ndarray]:
        """Ids the items carried in the dataset this one was sampled from."""
        return self._source_ids

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, d={self.d})"


def load_dense(path, format: str = "csv", skip_header: bool = False) -> Dataset:
    """Load a dense numeric text file, one item per row.

    Args:
        path: file to read.
        format: "csv" (comma-separated) or "whitespace".
        skip_header: drop the first line before parsing.

    Raises:
        DatasetError: missing file, no rows, ragged rows, or a
            non-numeric cell; row numbers in messages are 1-based
            file line numbers.
    """
    if format not in ("csv", "whitespace"):
        raise DatasetError(f"unknown format {format!r} (expected 'csv' or 'whitespace')")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc

    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if skip_header and lineno == 1:
            continue
        if not line.strip():
            continue
        cells = line.split(",") if format == "csv" else line.split()
        values = []
        for cell in cells:
            try:
                values.append(float(cell))
            except ValueError:
                raise DatasetError(
                    f"non-numeric cell {cell.strip()!r} in row {lineno}"
                ) from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DatasetError(
                f"ragged row {lineno}: expected {width} columns, got {len(values)}"
            )
        rows.append(values)

    if not rows:
        raise DatasetError(f"no rows in {path}")
    return Dataset(np.array(rows, dtype=np.float64))


def save_dense(ds: Dataset, path, format: str = "csv") -> None:
    """Write a dataset in a form :func:`load_dense` reads back exactly."""
    delim = "," if format == "csv" else " "
    np.savetxt(path, ds.vectors, fmt="%.17g", delimiter=delim)


def normalize(ds: Dataset, mode: str = "item") -> Dataset:
    """Center and scale vectors to zero mean and unit Euclidean norm.

    mode="item" (default) centers each row on its own mean and scales the
    row to norm 1; rows that are all-zero after centering are kept as zero
    vectors. mode="feature" centers each column instead and scales rows
    afterwards.
    """
    if mode not in ("item", "feature"):
        raise DatasetError(f"unknown normalize mode {mode!r}")
    v = ds.vectors
    if mode == "item":
        centered = v - v.mean(axis=1, keepdims=True)
    else:
        centered = v - v.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centered, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return Dataset(centered / safe, source_ids=ds.source_ids)


def synth_gaussian_mixture(
    n: int, d: int, clusters: int, spread: float, seed: int
) -> Dataset:
    """Sample n points around `clusters` uniform centers in [-1, 1]^d.

    Deterministic for a fixed seed. Cluster assignment is uniform; points
    are Gaussian around their center with standard deviation `spread`.
    """
    if n < 1 or d < 1 or clusters < 1:
        raise DatasetError("n, d and clusters must all be >= 1")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-1.0, 1.0, size=(clusters, d))
    assignment = rng.integers(0, clusters, size=n)
    points = centers[assignment] + spread * rng.standard_normal((n, d))
    return Dataset(points)


def subsample(ds: Dataset, m: int, seed: int) -> Dataset:
    """Draw m distinct items uniformly without replacement.

    The result has fresh contiguous ids; the originals are retained in
    `source_ids`. Deterministic per seed.
    """
    if not 1 <= m <= ds.n:
        raise DatasetError(f"cannot subsample m={m} from n={ds.n}")
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(ds.n, size=m, replace=False))
    base = ds.source_ids if ds.source_ids is not None else ds.ids
    return Dataset(ds.vectors[picked], source_ids=base[picked])
