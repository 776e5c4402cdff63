"""Balanced random partitioning through virtual slot assignment.

A partition of N items into L parts is drawn by giving every part
ceil(N/L) virtual locations and placing items one at a time into a
location chosen uniformly among the free ones. Every injective placement
is equally likely, so no part ever exceeds ceil(N/L) items and the
assignment is exchangeable across items.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def subseed(master_seed: int, *path: int) -> np.random.SeedSequence:
    """Deterministic RNG substream keyed by (master_seed, *path).

    Rounds and machines derive their randomness from fixed keys before
    any parallel dispatch, so execution interleaving cannot change it.
    """
    return np.random.SeedSequence([int(master_seed), *[int(p) for p in path]])


@dataclass(frozen=True)
class PartitionPlan:
    """L disjoint parts covering the input items, plus the draw's seed key."""

    parts: tuple[np.ndarray, ...]
    n: int
    l: int

    @property
    def sizes(self) -> list[int]:
        return [len(p) for p in self.parts]


def balanced_random_partition(items, l: int, seed) -> PartitionPlan:
    """Partition `items` into `l` parts of at most ceil(N/l) items each.

    `seed` is anything numpy's default_rng accepts (int, SeedSequence,
    Generator). Items are processed in ascending id order so the result
    depends only on the item set, not its input order. Parts can come up
    empty only when free locations outnumber items enough that one
    part's slots are never hit; with l <= N this requires
    (l-1) * ceil(N/l) >= N.
    """
    if l < 1:
        raise ValueError("need at least one part")
    arr = np.unique(np.asarray(list(items), dtype=np.int64))
    n = len(arr)
    if n == 0:
        raise ValueError("cannot partition an empty item set")

    cap = -(-n // l)  # ceil(n / l)
    rng = np.random.default_rng(seed)
    free = np.arange(l * cap, dtype=np.int64)
    free_count = len(free)
    # Pre-draw the whole shrinking-range index stream, then replay the
    # swap-remove placement; identical to drawing one index per item.
    draws = rng.integers(0, np.arange(free_count, free_count - n, -1))

    assigned = np.empty(n, dtype=np.int64)
    for i in range(n):
        j = draws[i]
        assigned[i] = free[j]
        free_count -= 1
        free[j] = free[free_count]

    part_of = assigned // cap
    parts = tuple(np.sort(arr[part_of == p]) for p in range(l))
    return PartitionPlan(parts=parts, n=n, l=l)
