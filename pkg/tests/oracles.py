"""Slow, direct reference computations used to cross-check the library."""

import itertools
import math

import numpy as np

from anykernel.graphs import EvolvingGraph, UniverseElement


def marked_isomorphic(nodes_a, edges_a, marks_a, nodes_b, edges_b, marks_b) -> bool:
    """Try every bijection; marks must match and edges must map onto edges."""
    nodes_a, nodes_b = list(nodes_a), list(nodes_b)
    if len(nodes_a) != len(nodes_b) or len(edges_a) != len(edges_b):
        return False
    eb = {frozenset(e) for e in edges_b}
    for perm in itertools.permutations(nodes_b):
        f = dict(zip(nodes_a, perm))
        if any(marks_a.get(v, -1) != marks_b.get(f[v], -1) for v in nodes_a):
            continue
        if all(frozenset((f[u], f[v])) in eb for u, v in edges_a):
            return True
    return False


def pair_view(u: UniverseElement):
    g = u.graph
    nodes = sorted(g.closed_neighborhood(u.i) | g.closed_neighborhood(u.j))
    edges = [(a, b) for a in nodes for b in nodes if a < b and g.adjacent(a, b)]
    return nodes, edges, {u.i: 0, u.j: 1}


def random_pair(rng, n_nodes=7, density=None):
    """A random graph on n_nodes (features unused) and a random pair in it."""
    density = rng.uniform(0.1, 0.7) if density is None else density
    edges = [(a, b) for a in range(n_nodes) for b in range(a + 1, n_nodes) if rng.random() < density]
    g = EvolvingGraph.from_edges([np.zeros(1)] * n_nodes, edges)
    i, j = (int(v) for v in rng.choice(n_nodes, size=2, replace=False))
    return UniverseElement(i, j, g), edges


def relabeled(u: UniverseElement, edges, rng):
    n = u.graph.history.n_nodes
    perm = rng.permutation(n)
    g = EvolvingGraph.from_edges([np.zeros(1)] * n, [(int(perm[a]), int(perm[b])) for a, b in edges])
    return UniverseElement(int(perm[u.i]), int(perm[u.j]), g)


def ball_learner_projected_gradient(K, y, radius, steps=20000):
    """Maximize (1/n) a^T K y over a^T K a <= radius^2 by projected gradient in feature space.

    Works with a square root factor K = L L^T so the constraint is a Euclidean ball on L^T a.
    """
    n = len(y)
    w, V = np.linalg.eigh(0.5 * (K + K.T))
    w = np.clip(w, 0, None)
    L = V * np.sqrt(w)
    grad = L.T @ y / n  # objective in b = L^T a is grad . b
    b = np.zeros(n)
    step = 1.0 / max(np.linalg.norm(grad), 1e-300)
    for _ in range(steps):
        b = b + step * grad
        norm = np.linalg.norm(b)
        if norm > radius:
            b = b * (radius / norm)
    return float(grad @ b)


def grid_argmin(fn, lo=0.0, hi=1.0, points=200001):
    grid = np.linspace(lo, hi, points)
    values = np.array([fn(p) for p in grid])
    return float(grid[int(np.argmin(values))])


def naive_kce(residuals, kernel_matrix):
    total = 0.0
    n = len(residuals)
    for a in range(n):
        for b in range(n):
            total += residuals[a] * residuals[b] * kernel_matrix[a][b]
    return math.sqrt(max(total, 0.0))
