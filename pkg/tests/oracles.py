"""Independent oracles: brute-force walk enumeration and the entropy fixture family."""

import itertools

import numpy as np

from graphcnn.graph import (Graph, complete_graph, cycle_graph, erdos_renyi, make_rng, path_graph,
                            ring_graph, star_graph)


def enumerate_walk_counts(g: Graph, labels, length: int, m: int) -> np.ndarray:
    """Count every node sequence of ``length`` hops whose consecutive pairs are edges."""
    succ = {v: set() for v in range(g.n)}
    for s, d, w in g.edges():
        if w != 0:
            succ[s].add(d)
    counts = np.zeros((m, m), dtype=np.int64)
    for walk in itertools.product(range(g.n), repeat=length + 1):
        if all(walk[k + 1] in succ[walk[k]] for k in range(length)):
            counts[labels[walk[0]], labels[walk[-1]]] += 1
    return counts


def small_graph_fixtures():
    """Labelled graphs on at most 8 nodes covering the structural corner cases."""
    rng = make_rng(2024)
    graphs = [ring_graph(1), ring_graph(5), cycle_graph(6), path_graph(7), complete_graph(4),
              star_graph(5), Graph.empty(3), Graph.from_edges(4, [(0, 1), (2, 3)])]
    for n in range(2, 9):
        for directed in (False, True):
            for p in (0.2, 0.5):
                mask = rng.random((n, n)) < p
                if not directed:
                    mask = np.triu(mask)
                s, d = np.nonzero(mask)
                w = rng.uniform(0.1, 3.0, len(s))
                graphs.append(Graph.from_edges(n, list(zip(s, d, w)), directed=directed))
        graphs.append(erdos_renyi(n, 0.4, n))
    out = []
    for g in graphs:
        m = int(min(3, max(g.n, 1)))
        labels = np.arange(g.n) % m
        rng.shuffle(labels)
        out.append((g, labels, m))
    return out
