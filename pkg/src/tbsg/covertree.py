"""Simplified cover tree: every dataset point is a tree node.

The tree partitions space into nested balls whose radii shrink geometrically
with depth (covdist(p) = base ** level(p)). It serves two purposes here:
its root is the fixed search entry point, and each node's children join that
node's candidate pool during graph construction, which ties the whole graph
together even when the point happens to sit far from its KNNG neighbors.
"""

from __future__ import annotations

import numpy as np

from .core import Dataset, distances_to_many, l2_distance

__all__ = ["CoverTree", "build_cover_tree"]


class CoverTree:
    """Nearest-ancestor cover tree over a Dataset; node ids are point ids."""

    def __init__(self, dataset: Dataset, base: float = 2.0):
        if dataset.count < 1:
            raise ValueError("cover tree requires a non-empty dataset")
        if base <= 1.0:
            raise ValueError(f"base must be > 1, got {base}")
        self.dataset = dataset
        self.base = float(base)
        self.root = 0
        n = dataset.count
        self._level = np.zeros(n, dtype=np.int64)
        self._parent = np.full(n, -1, dtype=np.int64)
        self._children: list[list[int]] = [[] for _ in range(n)]
        self._present = np.zeros(n, dtype=bool)
        self._present[self.root] = True

    @property
    def count(self) -> int:
        return int(self._present.sum())

    def level(self, p: int) -> int:
        self._check_member(p)
        return int(self._level[p])

    def parent(self, p: int) -> int | None:
        self._check_member(p)
        q = int(self._parent[p])
        return None if q < 0 else q

    def children(self, p: int) -> list[int]:
        self._check_member(p)
        return list(self._children[p])

    def covdist(self, p: int) -> float:
        self._check_member(p)
        return self.base ** int(self._level[p])

    def _check_member(self, p: int) -> None:
        if not (0 <= p < self._present.shape[0]) or not self._present[p]:
            raise ValueError(f"point {p} is not in the tree")

    def insert(self, p: int) -> None:
        """Descend from the root and attach p under its nearest covering node.

        At each step the closest child (lowest id on ties) absorbs p if p is
        inside that child's covering ball; otherwise p becomes a new child of
        the current node one level down. The root's level grows first if even
        its ball cannot cover p.
        """
        if not 0 <= p < self._present.shape[0]:
            raise ValueError(f"point id {p} out of range")
        if self._present[p]:
            raise ValueError(f"point {p} already inserted")
        x = self.dataset.vectors64
        d_root = l2_distance(x[self.root], x[p])
        while self.base ** int(self._level[self.root]) < d_root:
            self._level[self.root] += 1
        node = self.root
        while True:
            kids = self._children[node]
            if kids:
                kid_ids = np.asarray(kids, dtype=np.int64)
                d = distances_to_many(self.dataset, x[p], ids=kid_ids)
                best = int(np.lexsort((kid_ids, d))[0])
                child = int(kid_ids[best])
                if d[best] <= self.base ** int(self._level[child]):
                    node = child
                    continue
            self._parent[p] = node
            self._level[p] = self._level[node] - 1
            self._children[node].append(p)
            self._present[p] = True
            return


def build_cover_tree(dataset: Dataset, base: float = 2.0, seed: int = 0) -> CoverTree:
    """Insert every point, rooted at point 0, in a seed-permuted order."""
    tree = CoverTree(dataset, base=base)
    n = dataset.count
    if n > 1:
        rng = np.random.Generator(np.random.PCG64(seed))
        for p in rng.permutation(np.arange(1, n)):
            tree.insert(int(p))
    return tree
