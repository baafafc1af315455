"""Graph algorithms on the state space: closed classes, path costs and
minimum-cost arborescences."""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra


def recurrent_classes(n: int, src: np.ndarray, dst: np.ndarray) -> list[np.ndarray]:
    """Closed strongly connected components of the digraph ``src -> dst``."""
    g = csr_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))
    n_comp, labels = connected_components(g, directed=True, connection="strong")
    leaves = labels[src] != labels[dst]
    open_ = np.zeros(n_comp, dtype=bool)
    open_[labels[src[leaves]]] = True
    closed = np.flatnonzero(~open_)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(n_comp + 1))
    return [np.sort(order[bounds[c]:bounds[c + 1]]) for c in closed]


def cost_graph(n: int, src: np.ndarray, dst: np.ndarray, cost: np.ndarray) -> csr_matrix:
    """Sparse weighted digraph; explicit zero weights are kept as edges."""
    m = src != dst
    g = csr_matrix((cost[m].astype(np.float64), (src[m], dst[m])), shape=(n, n))
    return g


def min_costs_between(graph: csr_matrix, nodes: np.ndarray, chunk: int = 16) -> np.ndarray:
    """C[i, j] = shortest-path cost from nodes[i] to nodes[j] (inf if none)."""
    out = np.empty((len(nodes), len(nodes)))
    for lo in range(0, len(nodes), chunk):
        d = dijkstra(graph, directed=True, indices=nodes[lo:lo + chunk])
        out[lo:lo + chunk] = d[:, nodes]
    np.fill_diagonal(out, 0.0)
    return out


def reachable(graph: csr_matrix, start: int) -> np.ndarray:
    from scipy.sparse.csgraph import breadth_first_order
    return breadth_first_order(graph, start, directed=True, return_predecessors=False)


def min_arborescence(W: np.ndarray, root: int) -> float:
    """Cost of the cheapest spanning arborescence rooted at ``root`` where
    every other node has one incoming edge, ``W[u, v]`` being the cost of
    ``u -> v``.  Returns inf when some node cannot be reached from the root.
    """
    W = np.array(W, dtype=np.float64)
    total = 0.0
    while True:
        n = W.shape[0]
        if n == 1:
            return total
        np.fill_diagonal(W, np.inf)
        W[:, root] = np.inf
        pre = np.argmin(W, axis=0)
        in_w = W[pre, np.arange(n)]
        in_w[root] = 0.0
        pre[root] = root
        if np.isinf(in_w).any():
            return float("inf")
        # find cycles of v -> pre[v]
        color = np.zeros(n, dtype=np.int64)  # 0 new, >0 walk id
        comp = -np.ones(n, dtype=np.int64)
        cycles = []
        for start in range(n):
            if color[start]:
                continue
            v = start
            path = []
            while not color[v] and v != root:
                color[v] = start + 1
                path.append(v)
                v = pre[v]
            if v != root and color[v] == start + 1:
                cyc = path[path.index(v):]
                cycles.append(cyc)
        if not cycles:
            return total + float(in_w.sum())
        in_cycle = np.zeros(n, dtype=bool)
        next_id = 0
        for cyc in cycles:
            comp[cyc] = next_id
            in_cycle[cyc] = True
            total += float(in_w[cyc].sum())
            next_id += 1
        rest = np.flatnonzero(comp < 0)
        comp[rest] = np.arange(next_id, next_id + len(rest))
        m = next_id + len(rest)
        adj = W - np.where(in_cycle, in_w, 0.0)[None, :]
        # min over members of each component, rows then columns
        order = np.argsort(comp, kind="stable")
        starts = np.searchsorted(comp[order], np.arange(m))
        rows = np.minimum.reduceat(adj[order], starts, axis=0)
        W2 = np.minimum.reduceat(rows[:, order], starts, axis=1)
        root = int(comp[root])
        W = W2


def arborescence_costs(C: np.ndarray) -> np.ndarray:
    """Per-root cost of the cheapest in-tree toward each root, where every
    non-root node keeps one outgoing edge of cost ``C[s, s']``."""
    Wt = C.T
    return np.array([min_arborescence(Wt, r) for r in range(C.shape[0])])
