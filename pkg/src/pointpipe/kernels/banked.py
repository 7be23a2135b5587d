"""Lock-step concurrent kNN over banked node storage with conflict elision.

Several queries traverse one tree in lock step, one node visit per query
per cycle. Tree nodes map to memory banks by node id; when two queries
target the same bank in a cycle, the lowest-numbered query proceeds and the
others skip the whole subtree beneath their conflicted node instead of
retrying. Deadlines still cap each query's visits. The simulation is
sequential and deterministic; a single query degenerates to the plain
search.
"""

from __future__ import annotations

import numpy as np

from ..simulator import BankModel
from .kdtree import KdTree, KnnCursor, SearchResult


def knn_search_elide(
    tree: KdTree,
    queries: np.ndarray,
    model: BankModel,
    k: int,
    deadline: int | None = None,
) -> list[SearchResult]:
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    cursors = [KnnCursor(tree, q, k, deadline) for q in queries]
    while True:
        wants = [(i, cur.next_node()) for i, cur in enumerate(cursors)]
        wants = [(i, node) for i, node in wants if node is not None]
        if not wants:
            break
        granted_banks: set[int] = set()
        for i, node in wants:
            bank = model.bank_of(node.node_id)
            if bank in granted_banks:
                cursors[i].skip(node)
            else:
                granted_banks.add(bank)
                cursors[i].visit(node)
    return [cur.result() for cur in cursors]
