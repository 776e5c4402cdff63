"""Value oracles for monotone non-negative submodular functions.

Two real objectives ship here: quantization-error reduction for exemplar
selection (squared-distance k-medoid style, with an auxiliary zero
element) and the information-gain log-determinant objective under a
squared-exponential kernel. A weighted-coverage objective is included as
a cheap, brute-forceable instance for tests.

Each oracle answers ``value(S)`` and ``marginal(e, S)`` queries and hands
out :class:`SelectionCursor` objects that evaluate marginal gains
incrementally while a solver grows one set. Every query - a value, a
marginal, or one candidate inside a batched ``gains`` call - bumps the
oracle's ``eval_count`` by one, so deterministic solvers always produce
the same count.
"""

from __future__ import annotations

import copy
import threading
from abc import ABC, abstractmethod
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .dataset import Dataset, subsample

# Below this squared-pivot value the incremental log-det factorization is
# considered unreliable and a fresh factorization is computed instead.
PIVOT_FLOOR = 1e-12


class UnknownItemError(LookupError):
    """An item id outside the oracle's ground set was queried."""


def _as_id_array(items: Iterable[int]) -> np.ndarray:
    arr = np.asarray(list(items), dtype=np.int64)
    return arr


class SelectionCursor(ABC):
    """Incremental evaluator for one growing selection.

    A cursor belongs to the oracle that created it and charges that
    oracle's call counter. ``gains`` evaluates candidates independently
    of one another, so a candidate's gain never depends on what else is
    in the batch.
    """

    def __init__(self, oracle: "ObjectiveOracle"):
        self._oracle = oracle
        self.selected: list[int] = []

    @property
    def value(self) -> float:
        """Objective value of the current selection."""
        return self._current_value()

    def gain(self, item: int) -> float:
        """Marginal gain of adding `item` to the current selection."""
        return float(self.gains(np.asarray([item]))[0])

    def gains(self, candidates: np.ndarray) -> np.ndarray:
        """Marginal gains for every candidate, one oracle call each."""
        candidates = np.asarray(candidates, dtype=np.int64)
        self._oracle._check_ids(candidates)
        self._oracle._charge(len(candidates))
        return self._gains(candidates)

    def add(self, item: int) -> None:
        self._oracle._check_ids(np.asarray([item]))
        self._add(int(item))
        self.selected.append(int(item))

    @abstractmethod
    def _current_value(self) -> float: ...

    @abstractmethod
    def _gains(self, candidates: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _add(self, item: int) -> None: ...


class ObjectiveOracle(ABC):
    """Value-oracle contract shared by all objectives."""

    def __init__(self, ground_size: int):
        self._ground_size = int(ground_size)
        self._eval_count = 0
        self._count_lock = threading.Lock()

    @property
    def ground_size(self) -> int:
        return self._ground_size

    @property
    def eval_count(self) -> int:
        """Number of value-oracle queries answered so far."""
        return self._eval_count

    def _charge(self, queries: int = 1) -> None:
        with self._count_lock:
            self._eval_count += queries

    def _check_ids(self, items: np.ndarray) -> None:
        if len(items) and ((items < 0).any() or (items >= self._ground_size).any()):
            bad = items[(items < 0) | (items >= self._ground_size)][0]
            raise UnknownItemError(f"unknown item id {int(bad)}")

    def value(self, items: Iterable[int]) -> float:
        """f(S) for the queried set; f(empty) == 0 for every objective."""
        arr = _as_id_array(items)
        self._check_ids(arr)
        self._charge()
        if len(arr) == 0:
            return 0.0
        return self._value(np.unique(arr))

    def marginal(self, item: int, items: Iterable[int]) -> float:
        """f(S + e) - f(S). Raises if `item` is already in the set."""
        arr = _as_id_array(items)
        self._check_ids(arr)
        self._check_ids(np.asarray([item]))
        if int(item) in set(arr.tolist()):
            raise ValueError(f"item {int(item)} is already in the set")
        self._charge()
        base = self._value(np.unique(arr)) if len(arr) else 0.0
        return self._value(np.unique(np.append(arr, item))) - base

    def fork(self) -> "ObjectiveOracle":
        """A view of the same objective with a fresh call counter.

        Shares all read-only data; used to give each simulated machine
        its own counter so totals merge deterministically.
        """
        clone = copy.copy(self)
        clone._eval_count = 0
        clone._count_lock = threading.Lock()
        return clone

    @abstractmethod
    def selection(self) -> SelectionCursor:
        """A fresh incremental cursor starting from the empty set."""

    @abstractmethod
    def _value(self, items: np.ndarray) -> float: ...


def _sq_distance_row(points: np.ndarray, sq_norms: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances from every point to one target."""
    d = sq_norms + (target @ target - 2.0 * (points @ target))
    np.maximum(d, 0.0, out=d)
    return d


def _sq_distances(points: np.ndarray, sq_norms: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape (len(points), len(targets)).

    One matvec per target, never a matrix product over the whole batch:
    a target's column must come out bit-identical whether it is computed
    alone or alongside others, which is what lets the cursors keep their
    batch-independence promise. BLAS matrix kernels do not give that.
    """
    out = np.empty((targets.shape[0], points.shape[0]))
    for j, t in enumerate(targets):
        out[j] = _sq_distance_row(points, sq_norms, t)
    return out.T


class ExemplarObjective(ObjectiveOracle):
    """Reduction in mean squared-distance quantization error.

    f(S) = L({z}) - L(S + {z}) with z the zero auxiliary vector and
    L(A) the mean over the evaluation set of the squared distance to the
    nearest element of A. Evaluation uses the full dataset when it has at
    most `eval_size` items, otherwise a fixed seed-controlled subsample
    shared by everything that evaluates this oracle.
    """

    def __init__(
        self,
        data: Dataset,
        eval_size: int = 10_000,
        eval_seed: int = 0,
        eval_data: Optional[Dataset] = None,
    ):
        super().__init__(data.n)
        self._data = data
        if eval_data is None:
            if data.n > eval_size:
                eval_data = subsample(data, eval_size, eval_seed)
            else:
                eval_data = data
        self._eval = eval_data.vectors
        # Squared distance of each evaluation point to the zero element.
        self._base = np.einsum("ij,ij->i", self._eval, self._eval)
        self._eval_sq_norms = self._base

    @property
    def data(self) -> Dataset:
        return self._data

    def _value(self, items: np.ndarray) -> float:
        d = _sq_distances(self._eval, self._eval_sq_norms, self._data.vectors[items])
        min_dist = np.minimum(self._base, d.min(axis=1))
        return float(np.mean(self._base - min_dist))

    def selection(self) -> "ExemplarCursor":
        return ExemplarCursor(self)


class ExemplarCursor(SelectionCursor):
    def __init__(self, oracle: ExemplarObjective):
        super().__init__(oracle)
        self._ex = oracle
        self._min_dist = oracle._base.copy()

    def _current_value(self) -> float:
        return float(np.mean(self._ex._base - self._min_dist))

    def _gains(self, candidates: np.ndarray) -> np.ndarray:
        # Row at a time: peak memory stays at one evaluation-set row no
        # matter how wide the batch is, and every candidate goes through
        # the exact same sequence of operations as a lone gain() call.
        ex = self._ex
        vecs = ex._data.vectors
        out = np.empty(len(candidates))
        for j, c in enumerate(candidates):
            d = _sq_distance_row(ex._eval, ex._eval_sq_norms, vecs[c])
            np.subtract(self._min_dist, d, out=d)
            np.maximum(d, 0.0, out=d)
            out[j] = d.mean()
        return out

    def _add(self, item: int) -> None:
        d = _sq_distance_row(
            self._ex._eval, self._ex._eval_sq_norms, self._ex._data.vectors[item]
        )
        np.minimum(self._min_dist, d, out=self._min_dist)


class LogDetObjective(ObjectiveOracle):
    """Information gain of observing S under a squared-exponential kernel.

    f(S) = 0.5 * logdet(I + sigma^-2 * K_SS) with
    K(x, y) = exp(-||x - y||^2 / h^2). Always non-negative because
    I + sigma^-2 K_SS dominates the identity. `exponent="plain"` switches
    the kernel to exp(-||x - y|| / h^2).
    """

    def __init__(
        self,
        data: Dataset,
        bandwidth: float = 0.5,
        noise: float = 1.0,
        exponent: str = "squared",
    ):
        super().__init__(data.n)
        if bandwidth <= 0 or noise <= 0:
            raise ValueError("bandwidth and noise must be positive")
        if exponent not in ("squared", "plain"):
            raise ValueError(f"unknown kernel exponent {exponent!r}")
        self._data = data
        self._h2 = float(bandwidth) ** 2
        self._inv_noise2 = 1.0 / float(noise) ** 2
        self._exponent = exponent
        v = data.vectors
        self._sq_norms = np.einsum("ij,ij->i", v, v)

    @property
    def data(self) -> Dataset:
        return self._data

    def _kernel(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        v = self._data.vectors
        d = _sq_distances(v[rows], self._sq_norms[rows], v[cols])
        if self._exponent == "plain":
            d = np.sqrt(d)
        return np.exp(-d / self._h2)

    def _value(self, items: np.ndarray) -> float:
        m = np.eye(len(items)) + self._inv_noise2 * self._kernel(items, items)
        chol = np.linalg.cholesky(m)
        return float(np.sum(np.log(np.diag(chol))))

    def selection(self) -> "LogDetCursor":
        return LogDetCursor(self)


class LogDetCursor(SelectionCursor):
    """Grows a triangular factorization of I + sigma^-2 K_SS one item at
    a time; marginals cost O(|S|^2) per candidate. Falls back to a fresh
    factorization whenever a squared pivot drops below PIVOT_FLOOR."""

    def __init__(self, oracle: LogDetObjective):
        super().__init__(oracle)
        self._ld = oracle
        self._chol = np.zeros((0, 0))
        self._logdet_half = 0.0

    def _current_value(self) -> float:
        return self._logdet_half

    def _diag_term(self) -> float:
        return 1.0 + self._ld._inv_noise2

    def _gains(self, candidates: np.ndarray) -> np.ndarray:
        if not self.selected:
            return np.full(len(candidates), 0.5 * np.log(self._diag_term()))
        # One solve per candidate: a blocked multi-RHS solve rounds
        # differently from the single-vector solve used by add(), which
        # would break the batch-independence promise on near-ties.
        sel = np.asarray(self.selected)
        diag = self._diag_term()
        out = np.empty(len(candidates))
        for j, c in enumerate(candidates):
            col = self._ld._inv_noise2 * self._ld._kernel(sel, np.asarray([c]))[:, 0]
            w = solve_triangular(self._chol, col, lower=True, check_finite=False)
            piv2 = diag - float(w @ w)
            out[j] = 0.5 * np.log(max(piv2, PIVOT_FLOOR))
        return out

    def _add(self, item: int) -> None:
        s = len(self.selected)
        if s == 0:
            piv2 = self._diag_term()
            self._chol = np.array([[np.sqrt(piv2)]])
            self._logdet_half += 0.5 * np.log(piv2)
            return
        col = self._ld._inv_noise2 * self._ld._kernel(
            np.asarray(self.selected), np.asarray([item])
        )[:, 0]
        w = solve_triangular(self._chol, col, lower=True, check_finite=False)
        piv2 = self._diag_term() - float(w @ w)
        if piv2 < PIVOT_FLOOR:
            items = np.asarray(self.selected + [item])
            m = np.eye(s + 1) + self._ld._inv_noise2 * self._ld._kernel(items, items)
            self._chol = np.linalg.cholesky(m)
            self._logdet_half = float(np.sum(np.log(np.diag(self._chol))))
            return
        grown = np.zeros((s + 1, s + 1))
        grown[:s, :s] = self._chol
        grown[s, :s] = w
        grown[s, s] = np.sqrt(piv2)
        self._chol = grown
        self._logdet_half += 0.5 * np.log(piv2)


class WeightedCoverageObjective(ObjectiveOracle):
    """Total weight of the universe elements covered by the selection.

    Built for small brute-forceable test instances; reduces to a modular
    function when the per-item cover sets are disjoint.
    """

    def __init__(self, cover_sets: Sequence[Iterable[int]], weights: Sequence[float]):
        super().__init__(len(cover_sets))
        w = np.asarray(weights, dtype=np.float64)
        if (w < 0).any():
            raise ValueError("universe weights must be non-negative")
        self._weights = w
        universe = len(w)
        cover = np.zeros((len(cover_sets), universe), dtype=bool)
        for i, covered in enumerate(cover_sets):
            for u in covered:
                if not 0 <= u < universe:
                    raise ValueError(f"cover element {u} outside universe 0..{universe - 1}")
                cover[i, u] = True
        self._cover = cover

    @classmethod
    def modular(cls, item_weights: Sequence[float]) -> "WeightedCoverageObjective":
        """Modular objective: item i contributes exactly item_weights[i]."""
        n = len(item_weights)
        return cls([[i] for i in range(n)], item_weights)

    def _value(self, items: np.ndarray) -> float:
        mask = self._cover[items].any(axis=0)
        return float((self._weights * mask).sum())

    def selection(self) -> "CoverageCursor":
        return CoverageCursor(self)


class CoverageCursor(SelectionCursor):
    def __init__(self, oracle: WeightedCoverageObjective):
        super().__init__(oracle)
        self._cov = oracle
        self._covered = np.zeros(len(oracle._weights), dtype=bool)

    def _current_value(self) -> float:
        return float((self._cov._weights * self._covered).sum())

    def _gains(self, candidates: np.ndarray) -> np.ndarray:
        w = self._cov._weights
        out = np.empty(len(candidates))
        for j, c in enumerate(candidates):
            fresh = self._cov._cover[c] & ~self._covered
            out[j] = w[fresh].sum()
        return out

    def _add(self, item: int) -> None:
        self._covered |= self._cov._cover[item]
