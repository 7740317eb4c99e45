"""Independent reference implementations used as test oracles."""

import itertools

import numpy as np

from specpack.mmspace import MetricMeasureSpace


def floyd_warshall(P, edges, lengths):
    """All-pairs shortest paths by the O(P^3) recurrence."""
    D = np.full((P, P), np.inf)
    np.fill_diagonal(D, 0.0)
    for (u, v), ln in zip(edges, lengths):
        D[u, v] = min(D[u, v], ln)
        D[v, u] = min(D[v, u], ln)
    for k in range(P):
        D = np.minimum(D, D[:, k : k + 1] + D[k : k + 1, :])
    return D


def dense_laplacian(space: MetricMeasureSpace):
    P = space.n_points
    L = np.zeros((P, P))
    for (u, v), w in zip(space.edges, space.weights):
        L[u, v] -= w
        L[v, u] -= w
        L[u, u] += w
        L[v, v] += w
    return L, np.diag(space.measure)


def brute_xi(D, mu, w, m, r):
    """max over all center m-tuples of the restricted measure covered."""
    P = len(mu)
    balls = D <= r * (1 + 1e-12)
    best = 0.0
    for combo in itertools.combinations(range(P), min(m, P)):
        best = max(best, float(w[balls[list(combo)].any(axis=0)].sum()))
    return best


def min_set_cover(universe: set, subsets: list[set]) -> int:
    """Exact minimum cover size by iterative deepening DFS."""
    subsets = [s & universe for s in subsets]
    subsets = [s for s in subsets if s]

    def search(uncovered, budget):
        if not uncovered:
            return True
        if budget == 0:
            return False
        pivot = min(uncovered)
        for s in subsets:
            if pivot in s and search(uncovered - s, budget - 1):
                return True
        return False

    for size in range(1, len(universe) + 1):
        if search(frozenset(universe), size):
            return size
    return 0
