"""Dense push-relabel maximum preflow for s-t graphs with real capacities.

The graph has ``n`` inner nodes with a symmetric capacity matrix, a source
arc ``source -> i`` of capacity ``a[i]`` and a sink arc ``i -> sink`` of
capacity ``b[i]`` for every inner node.  Only a maximum preflow is computed;
that is enough for the minimum cut value and for the set of nodes that can
still reach the sink.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, InternalError


@dataclass
class PreflowResult:
    value: float
    sink_side: np.ndarray      # nodes that reach the sink in the residual graph
    pushes: int
    relabels: int


def _reach_sink(R: np.ndarray, b_res: np.ndarray, tol: float) -> np.ndarray:
    """Breadth-first distances to the sink along residual arcs (-1 if unreachable)."""
    n = b_res.size
    dist = np.full(n, -1, dtype=np.int64)
    frontier = np.flatnonzero(b_res > tol)
    dist[frontier] = 1
    level = 1
    while frontier.size:
        # i reaches the frontier if it has residual capacity into some frontier node
        cand = np.any(R[:, frontier] > tol, axis=1) & (dist < 0)
        frontier = np.flatnonzero(cand)
        level += 1
        dist[frontier] = level
    return dist


def max_preflow(C: np.ndarray, a: np.ndarray, b: np.ndarray, tol: float | None = None,
                max_iter: int | None = None) -> PreflowResult:
    """FIFO push-relabel with periodic global relabelling.

    ``C`` must be symmetric with zero diagonal and nonnegative entries.
    Residual capacities below ``tol`` count as saturated.
    """
    C = np.asarray(C, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size
    if C.shape != (n, n) or b.shape != (n,):
        raise ArgumentError("capacity shapes disagree")
    if n == 0:
        return PreflowResult(0.0, np.zeros(0, dtype=bool), 0, 0)
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ArgumentError("capacities must be finite")
    if np.any(C < 0) or np.any(a < 0) or np.any(b < 0):
        raise ArgumentError("capacities must be nonnegative")
    scale = max(float(C.max(initial=0.0)), float(a.max()), float(b.max()), 1e-300)
    if tol is None:
        tol = 1e-14 * scale
    R = C.copy()
    b_res = b.copy()
    excess = a.copy()
    sink_flow = 0.0
    big = n + 2                       # height of nodes cut off from the sink
    height = np.zeros(n, dtype=np.int64)
    pushes = relabels = 0
    max_iter = max_iter or 50 * n * n + 1000

    def global_relabel():
        d = _reach_sink(R, b_res, tol)
        height[:] = np.where(d < 0, big, d)

    global_relabel()
    queue = deque(int(i) for i in np.flatnonzero((excess > tol) & (height < big)))
    queued = np.zeros(n, dtype=bool)
    queued[list(queue)] = True
    since_global = 0
    it = 0
    while queue:
        it += 1
        if it > max_iter:
            raise InternalError("push-relabel did not terminate")
        u = queue.popleft()
        queued[u] = False
        while excess[u] > tol and height[u] < big:
            hu = height[u]
            if hu == 1 and b_res[u] > tol:
                delta = min(excess[u], b_res[u])
                b_res[u] -= delta
                excess[u] -= delta
                sink_flow += delta
                pushes += 1
                continue
            row = R[u]
            adm = np.flatnonzero((row > tol) & (height == hu - 1))
            if adm.size:
                res = row[adm]
                before = np.cumsum(res) - res
                amt = np.clip(excess[u] - before, 0.0, res)
                k = amt > 0
                adm, amt = adm[k], amt[k]
                R[u, adm] -= amt
                R[adm, u] += amt
                excess[adm] += amt
                excess[u] -= amt.sum()
                if excess[u] < tol:
                    excess[u] = max(excess[u], 0.0)
                pushes += adm.size
                for v in adm[(~queued[adm]) & (height[adm] < big)]:
                    queue.append(int(v))
                    queued[v] = True
                continue
            # relabel
            nbr = row > tol
            cand = height[nbr]
            new_h = int(cand.min()) + 1 if cand.size else big
            if b_res[u] > tol:
                new_h = 1
            height[u] = min(new_h, big)
            relabels += 1
            since_global += 1
            if since_global >= n:
                since_global = 0
                global_relabel()
                if height[u] >= big:
                    break
    reach = _reach_sink(R, b_res, tol) >= 0
    return PreflowResult(sink_flow, reach, pushes, relabels)
