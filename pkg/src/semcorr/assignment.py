"""Rectangular linear assignment by the Jonker-Volgenant shortest augmenting path method.

The implementation follows the column-reduction-free variant described by
Crouse (2016): rows of the smaller side are inserted one at a time, each by a
Dijkstra-like search over reduced costs, followed by a dual update and an
augmentation along the found path.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteCost


@dataclass(frozen=True)
class Assignment:
    """Injective matching of the smaller side of a cost matrix into the larger.

    ``rows[k]`` is matched to ``cols[k]``; ``rows`` is sorted. ``cost`` is the
    sum of the matched entries.
    """

    rows: np.ndarray
    cols: np.ndarray
    cost: float

    @property
    def size(self):
        return len(self.rows)


def _lsap_rows(cost):
    """Assign every row of a ``nr <= nc`` matrix; returns ``col4row``."""
    nr, nc = cost.shape
    u = np.zeros(nr)
    v = np.zeros(nc)
    col4row = np.full(nr, -1, dtype=np.int64)
    row4col = np.full(nc, -1, dtype=np.int64)
    for cur in range(nr):
        spc = np.full(nc, np.inf)
        path = np.full(nc, -1, dtype=np.int64)
        visited_rows = []
        done_cols = np.zeros(nc, dtype=bool)
        i = cur
        min_val = 0.0
        sink = -1
        while sink < 0:
            visited_rows.append(i)
            open_cols = ~done_cols
            reduced = min_val + cost[i] - u[i] - v
            better = open_cols & (reduced < spc)
            spc[better] = reduced[better]
            path[better] = i
            cand = np.where(open_cols, spc, np.inf)
            min_val = cand.min()
            if not np.isfinite(min_val):
                raise NonFiniteCost("assignment is infeasible")
            ties = np.flatnonzero(cand == min_val)
            free = ties[row4col[ties] < 0]
            j = int(free[0]) if free.size else int(ties[0])
            done_cols[j] = True
            if row4col[j] < 0:
                sink = j
            else:
                i = int(row4col[j])
        u[cur] += min_val
        for r in visited_rows[1:]:
            u[r] += min_val - spc[col4row[r]]
        v[done_cols] -= min_val - spc[done_cols]
        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, int(col4row[i])
            if i == cur:
                break
    return col4row


def solve_assignment(cost):
    """Minimum-cost injective matching of the smaller side of ``cost`` into the larger."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or min(cost.shape) < 1:
        raise NonFiniteCost(f"cost must be a non-empty 2-D matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise NonFiniteCost("cost matrix has non-finite entries")
    transposed = cost.shape[0] > cost.shape[1]
    work = cost.T if transposed else cost
    col4row = _lsap_rows(np.ascontiguousarray(work))
    rows = np.arange(work.shape[0])
    if transposed:
        rows, cols = col4row, rows
        order = np.argsort(rows)
        rows, cols = rows[order], cols[order]
    else:
        cols = col4row
    total = float(sum(cost[r, c] for r, c in zip(rows, cols)))
    return Assignment(rows=rows, cols=cols, cost=total)
