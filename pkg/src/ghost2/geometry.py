"""KD-tree partitioning and exact k-nearest-neighbour search."""

from __future__ import annotations

import heapq
import math

import numpy as np

from .errors import EmptyPointSet, NotEnoughNeighbors


class _Node:
    __slots__ = ("index", "lo", "hi", "axis", "left", "right")

    def __init__(self, index, lo, hi):
        self.index = index
        self.lo = lo
        self.hi = hi
        self.axis = -1
        self.left = None
        self.right = None

    @property
    def is_leaf(self):
        return self.left is None


class KdTree:
    """Median-split KD-tree over the rows of ``points``.

    Each internal node splits on the axis of largest spread (lowest axis
    on ties) at the median, so the leaves are contiguous runs along the
    split axes and every leaf holds at most ``leaf_capacity`` points.
    """

    def __init__(self, points, leaf_capacity: int = 1):
        P = np.asarray(points, dtype=np.float64)
        if P.ndim == 1:
            P = P.reshape(-1, 1)
        if P.shape[0] == 0:
            raise EmptyPointSet("cannot build a KD-tree over zero points")
        if leaf_capacity < 1:
            raise ValueError("leaf_capacity must be >= 1")
        self.points = P
        self.leaf_capacity = int(leaf_capacity)
        self.leaves: list[np.ndarray] = []
        self.depth = 0
        self.root = self._build(np.arange(P.shape[0]), 0)

    def _build(self, index, depth):
        pts = self.points[index]
        node = _Node(index, pts.min(axis=0), pts.max(axis=0))
        self.depth = max(self.depth, depth)
        if len(index) <= self.leaf_capacity:
            self.leaves.append(index)
            return node
        axis = int(np.argmax(node.hi - node.lo))
        order = index[np.lexsort((index, pts[:, axis]))]
        half = len(order) // 2
        node.axis = axis
        node.left = self._build(order[:half], depth + 1)
        node.right = self._build(order[half:], depth + 1)
        return node

    @property
    def m(self) -> int:
        return self.points.shape[0]

    def leaf_of(self) -> np.ndarray:
        """Leaf number of every point."""
        out = np.empty(self.m, dtype=np.int64)
        for j, leaf in enumerate(self.leaves):
            out[leaf] = j
        return out

    def leaf_medians(self) -> np.ndarray:
        return np.array([np.median(self.points[leaf], axis=0) for leaf in self.leaves])

    def query(self, q, k: int, eligible=None):
        """The ``k`` eligible points nearest to ``q``, nearest first.

        Ordering is by squared Euclidean distance, then by index, so
        equidistant points resolve to the lower index. ``eligible`` is an
        optional boolean mask over the points.
        """
        q = np.asarray(q, dtype=np.float64)
        available = self.m if eligible is None else int(np.count_nonzero(eligible))
        if k > available:
            raise NotEnoughNeighbors(k, available)
        if k <= 0:
            return np.empty(0, dtype=np.int64)
        heap: list[tuple[float, int]] = []  # (-dist2, -index): root is the worst kept

        def visit(node):
            if len(heap) == k:
                gap = np.maximum(node.lo - q, 0.0) + np.maximum(q - node.hi, 0.0)
                if float(gap @ gap) > -heap[0][0]:
                    return
            if node.is_leaf:
                idx = node.index
                if eligible is not None:
                    idx = idx[eligible[idx]]
                if len(idx) == 0:
                    return
                d2 = ((self.points[idx] - q) ** 2).sum(axis=1)
                for dist, i in zip(d2.tolist(), idx.tolist()):
                    item = (-dist, -i)
                    if len(heap) < k:
                        heapq.heappush(heap, item)
                    elif item > heap[0]:
                        heapq.heapreplace(heap, item)
                return
            # nearer child first tightens the bound sooner
            split = node.right.lo[node.axis]
            first, second = (node.left, node.right) if q[node.axis] < split else (node.right, node.left)
            visit(first)
            visit(second)

        visit(self.root)
        best = sorted((-d, -i) for d, i in heap)
        return np.array([i for _, i in best], dtype=np.int64)


def build_kdtree(points, leaf_capacity: int) -> KdTree:
    return KdTree(points, leaf_capacity)


def knn(points, query_index: int, k: int, same_label_filter=None, tree: KdTree | None = None):
    """Indices of the ``k`` nearest rows to row ``query_index``, excluding itself.

    ``same_label_filter`` restricts candidates to rows where the mask is
    true. Pass a prebuilt ``tree`` when issuing many queries.
    """
    tree = tree if tree is not None else KdTree(points, leaf_capacity=8)
    eligible = np.ones(tree.m, dtype=bool) if same_label_filter is None else np.array(same_label_filter, dtype=bool)
    eligible[query_index] = False
    return tree.query(tree.points[query_index], k, eligible)


def depth_bound(m: int, leaf_capacity: int) -> int:
    """Depth reached by median halving until nodes fit in a leaf."""
    return max(0, math.ceil(math.log2(m / leaf_capacity))) if m > leaf_capacity else 0
