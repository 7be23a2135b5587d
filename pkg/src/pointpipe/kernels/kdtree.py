"""kd-tree nearest-neighbor and range search with step-capped traversal.

The tree is a median-split bucket kd-tree: internal nodes split the widest
dimension at the upper-median coordinate (ties broken by point index), and
leaves hold up to ``leaf_size`` points. Searches run depth-first, descending
toward the query before backtracking, with sphere/plane pruning against the
current k-th best distance.

Every node visit (internal or leaf) costs one step; the root visit is step
one. A search given a step deadline stops the moment the budget is spent
and returns whatever it has found, flagged as truncated, so its latency is
input-independent. Without a deadline the result is exact.

Distances are squared Euclidean throughout; ordering ties break toward the
smaller point index, which makes results bit-comparable to brute force.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np


@dataclass
class KdNode:
    node_id: int
    # Internal nodes carry a split; leaves carry a bucket.
    split_dim: int = -1
    split_value: float = 0.0
    left: "KdNode | None" = None
    right: "KdNode | None" = None
    bucket: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.bucket is not None


@dataclass
class KdTree:
    root: KdNode
    points: np.ndarray
    leaf_size: int
    node_count: int
    depth: int


def _squared_distances(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    # One fixed evaluation order so tree search and brute force agree
    # bit for bit.
    d = points - query
    return d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2]


@dataclass
class SearchResult:
    """Neighbors as (point index, squared distance), ascending by
    (distance, index). ``steps_used`` counts node visits; ``truncated``
    marks a search stopped by its deadline with work left to do."""

    neighbors: list[tuple[int, float]]
    steps_used: int
    truncated: bool
    visited_points: list[int] | None = None


def kdtree_build(points: np.ndarray, leaf_size: int = 16) -> KdTree:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("points must have shape (n, 3)")
    if len(points) < 1:
        raise ValueError("cannot build a tree over zero points")
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")

    counter = [0]

    def build(indices: np.ndarray, level: int) -> tuple[KdNode, int]:
        node_id = counter[0]
        counter[0] += 1
        if len(indices) <= leaf_size:
            return KdNode(node_id=node_id, bucket=np.sort(indices)), level
        sub = points[indices]
        extents = sub.max(axis=0) - sub.min(axis=0)
        dim = int(np.argmax(extents))
        # Stable sort on (coordinate, index): deterministic for duplicates.
        order = indices[np.argsort(sub[:, dim], kind="stable")]
        mid = len(order) // 2
        split_value = float(points[order[mid], dim])
        node = KdNode(node_id=node_id, split_dim=dim, split_value=split_value)
        node.left, dl = build(order[:mid], level + 1)
        node.right, dr = build(order[mid:], level + 1)
        return node, max(dl, dr)

    root, depth = build(np.arange(len(points), dtype=np.int64), 1)
    return KdTree(
        root=root,
        points=points,
        leaf_size=leaf_size,
        node_count=counter[0],
        depth=depth,
    )


class KnnCursor:
    """Stepwise k-nearest-neighbor traversal of one query.

    ``next_node`` reports the node the search wants to visit next (popping
    entries its pruning rule discards, which costs nothing); ``visit``
    performs the visit, spending one step. Splitting the traversal this way
    lets several cursors advance in lock step against a banked memory, and
    a plain loop over one cursor is the sequential search.
    """

    def __init__(self, tree: KdTree, query: np.ndarray, k: int,
                 deadline: int | None = None, record_visited: bool = False):
        if k < 1:
            raise ValueError("k must be >= 1")
        if deadline is not None and deadline < 1:
            raise ValueError("deadline must be >= 1 when set")
        self.tree = tree
        self.query = np.asarray(query, dtype=np.float64)
        self.k = k
        self.deadline = deadline
        self.steps = 0
        self.truncated = False
        # Max-heap of the k best so far, keyed (-dist2, -index).
        self._heap: list[tuple[float, int]] = []
        # Stack entries: (node, plane_dist2 to reach it from the near side).
        self._stack: list[tuple[KdNode, float]] = [(tree.root, 0.0)]
        self.visited_points: list[int] | None = [] if record_visited else None

    # -- best-so-far bookkeeping ------------------------------------------

    def _worst(self) -> tuple[float, int]:
        d2, idx = self._heap[0]
        return -d2, -idx

    def _offer(self, idx: int, d2: float) -> None:
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, (-d2, -idx))
        else:
            wd2, widx = self._worst()
            if (d2, idx) < (wd2, widx):
                heapq.heapreplace(self._heap, (-d2, -idx))

    def _prunable(self, plane_d2: float) -> bool:
        if len(self._heap) < self.k:
            return False
        wd2, _ = self._worst()
        return plane_d2 > wd2

    # -- traversal ---------------------------------------------------------

    def out_of_budget(self) -> bool:
        return self.deadline is not None and self.steps >= self.deadline

    def next_node(self) -> KdNode | None:
        """The node this search will visit next, or None when finished.
        Deadline exhaustion with pending work marks the search truncated."""
        while self._stack:
            if self.out_of_budget():
                self.truncated = True
                self._stack.clear()
                return None
            node, plane_d2 = self._stack[-1]
            if self._prunable(plane_d2):
                self._stack.pop()
                continue
            return node
        return None

    def visit(self, node: KdNode) -> None:
        """Spend one step visiting ``node``: scan a leaf or descend toward
        the query, queueing the far side for backtracking."""
        assert self._stack and self._stack[-1][0] is node
        self._stack.pop()
        self.steps += 1
        if node.is_leaf:
            d2s = _squared_distances(self.tree.points[node.bucket], self.query)
            for idx, d2 in zip(node.bucket, d2s):
                if self.visited_points is not None:
                    self.visited_points.append(int(idx))
                self._offer(int(idx), float(d2))
            return
        gap = float(self.query[node.split_dim]) - node.split_value
        near, far = (node.left, node.right) if gap < 0 else (node.right, node.left)
        self._stack.append((far, gap * gap))
        self._stack.append((near, 0.0))

    def skip(self, node: KdNode) -> None:
        """Drop ``node`` (and so the subtree beneath it) without visiting."""
        assert self._stack and self._stack[-1][0] is node
        self._stack.pop()

    def result(self) -> SearchResult:
        ordered = sorted((-d2, -idx) for d2, idx in self._heap)
        return SearchResult(
            neighbors=[(idx, d2) for d2, idx in ordered],
            steps_used=self.steps,
            truncated=self.truncated,
            visited_points=self.visited_points,
        )


def knn_search(
    tree: KdTree,
    query: np.ndarray,
    k: int,
    deadline: int | None = None,
    record_visited: bool = False,
) -> SearchResult:
    """k nearest neighbors of ``query``; exact when ``deadline`` is None.

    Asking for more neighbors than the tree holds returns every point.
    """
    cursor = KnnCursor(tree, query, k, deadline, record_visited)
    while True:
        node = cursor.next_node()
        if node is None:
            break
        cursor.visit(node)
    return cursor.result()


def range_search(
    tree: KdTree,
    query: np.ndarray,
    radius: float,
    deadline: int | None = None,
) -> SearchResult:
    """All points within ``radius`` (inclusive) of ``query``, ascending by
    (distance, index); the deadline-capped variant returns the subset found
    within the step budget."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if deadline is not None and deadline < 1:
        raise ValueError("deadline must be >= 1 when set")
    q = np.asarray(query, dtype=np.float64)
    r2 = radius * radius
    hits: list[tuple[float, int]] = []
    stack: list[tuple[KdNode, float]] = [(tree.root, 0.0)]
    steps = 0
    truncated = False
    while stack:
        if deadline is not None and steps >= deadline:
            truncated = True
            break
        node, plane_d2 = stack.pop()
        if plane_d2 > r2:
            continue
        steps += 1
        if node.is_leaf:
            d2s = _squared_distances(tree.points[node.bucket], q)
            for idx, d2 in zip(node.bucket, d2s):
                if d2 <= r2:
                    hits.append((float(d2), int(idx)))
            continue
        gap = float(q[node.split_dim]) - node.split_value
        near, far = (node.left, node.right) if gap < 0 else (node.right, node.left)
        stack.append((far, gap * gap))
        stack.append((near, 0.0))
    hits.sort()
    return SearchResult(
        neighbors=[(idx, d2) for d2, idx in hits],
        steps_used=steps,
        truncated=truncated,
    )


def brute_force_knn(points: np.ndarray, query: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Reference answer: exhaustive (distance, index) ranking."""
    d2 = _squared_distances(points, np.asarray(query, dtype=np.float64))
    ranked = sorted((float(d), int(i)) for i, d in enumerate(d2))
    return [(idx, d) for d, idx in ranked[:k]]


def brute_force_range(
    points: np.ndarray, query: np.ndarray, radius: float
) -> list[tuple[int, float]]:
    d2 = _squared_distances(points, np.asarray(query, dtype=np.float64))
    hits = sorted((float(d), int(i)) for i, d in enumerate(d2) if d <= radius * radius)
    return [(idx, d) for d, idx in hits]


@dataclass
class DeadlineProfile:
    """Step statistics from uncapped searches plus the suggested cap."""

    deadline: int
    mean_steps: float
    steps: list[int] = field(repr=False, default_factory=list)


def profile_deadline(
    tree: KdTree,
    queries: np.ndarray,
    k: int,
    fraction,
) -> DeadlineProfile:
    """Run uncapped searches and suggest ceil(fraction * mean steps)."""
    from fractions import Fraction
    from math import ceil

    frac = Fraction(fraction)
    if not (0 < frac <= 1):
        raise ValueError("fraction must be in (0, 1]")
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if len(queries) == 0:
        raise ValueError("query set is empty")
    steps = [knn_search(tree, q, k).steps_used for q in queries]
    mean = Fraction(sum(steps), len(steps))
    return DeadlineProfile(
        deadline=ceil(frac * mean),
        mean_steps=float(mean),
        steps=steps,
    )
