"""Evolving graphs and the link-prediction kernels.

A ``GraphHistory`` is append-only: every node and edge carries the version at
which it appeared, so an ``EvolvingGraph`` snapshot is just (history, version)
and stays valid while the history keeps growing.  Neighborhoods are closed:
Gamma(v) holds v and its neighbors.
"""

from __future__ import annotations

import hashlib
import itertools
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .kernels import GridKernel, Kernel, KernelDomainError, ProductKernel

GRAPH_FORMAT = "anykernel-graph v1"


class GraphSizeError(ValueError):
    """Neighborhood too large for the configured limit."""


class GraphHistory:
    def __init__(self, feature_dim: int | None = None):
        self.feature_dim = feature_dim
        self.features: list[np.ndarray] = []
        self.node_version: list[int] = []
        self._nbrs: list[list[int]] = []
        self._nbr_versions: list[list[int]] = []
        self._adjacent: list[set] = []
        self.edges: list[tuple[int, int, int]] = []
        self.version = 0

    @property
    def n_nodes(self) -> int:
        return len(self.features)

    def add_node(self, features) -> int:
        z = np.asarray(features, dtype=float).ravel()
        if self.feature_dim is None:
            self.feature_dim = z.size
        elif z.size != self.feature_dim:
            raise ValueError("feature length mismatch")
        self.version += 1
        self.features.append(z)
        self.node_version.append(self.version)
        self._nbrs.append([])
        self._nbr_versions.append([])
        self._adjacent.append(set())
        return len(self.features) - 1

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError("self loops are not allowed")
        if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
            raise KernelDomainError(f"edge ({u}, {v}) names a missing node")
        if v in self._adjacent[u]:
            return
        self.version += 1
        for a, b in ((u, v), (v, u)):
            self._nbrs[a].append(b)
            self._nbr_versions[a].append(self.version)
            self._adjacent[a].add(b)
        self.edges.append((min(u, v), max(u, v), self.version))

    def adjacent_now(self, u: int, v: int) -> bool:
        return v in self._adjacent[u]

    def degree_now(self, v: int) -> int:
        return len(self._nbrs[v])

    def neighbors_now(self, v: int) -> list:
        return self._nbrs[v]

    def snapshot(self, version: int | None = None) -> "EvolvingGraph":
        return EvolvingGraph(self, self.version if version is None else version)

    @classmethod
    def from_edges(cls, features, edges) -> "GraphHistory":
        history = cls()
        for z in features:
            history.add_node(z)
        for u, v in edges:
            history.add_edge(u, v)
        return history


@dataclass(frozen=True)
class EvolvingGraph:
    """The graph as of ``version``: nodes and edges added at or before it."""

    history: GraphHistory
    version: int

    @property
    def t(self) -> int:
        return self.version

    def has_node(self, v: int) -> bool:
        return 0 <= v < self.history.n_nodes and self.history.node_version[v] <= self.version

    def nodes(self) -> list:
        return [v for v in range(self.history.n_nodes) if self.history.node_version[v] <= self.version]

    def _check(self, v: int) -> None:
        if not self.has_node(v):
            raise KernelDomainError(f"node {v} not present at version {self.version}")

    def neighbors(self, v: int) -> list:
        self._check(v)
        cut = bisect_right(self.history._nbr_versions[v], self.version)
        return self.history._nbrs[v][:cut]

    def closed_neighborhood(self, v: int) -> set:
        return set(self.neighbors(v)) | {v}

    def features(self, v: int) -> np.ndarray:
        self._check(v)
        return self.history.features[v]

    def adjacent(self, u: int, v: int) -> bool:
        return v in self.neighbors(u)

    def induced_edges(self, nodes) -> list:
        nodes = set(nodes)
        edges = []
        for u in nodes:
            for v in self.neighbors(u):
                if v in nodes and u < v:
                    edges.append((u, v))
        return edges

    @classmethod
    def from_edges(cls, features, edges) -> "EvolvingGraph":
        return GraphHistory.from_edges(features, edges).snapshot()


@dataclass(frozen=True)
class UniverseElement:
    """A candidate pair (i, j) on a graph snapshot."""

    i: int
    j: int
    graph: EvolvingGraph

    def __post_init__(self):
        if self.i == self.j:
            raise KernelDomainError("pair needs two distinct nodes")
        self.graph._check(self.i)
        self.graph._check(self.j)

    @property
    def version(self) -> int:
        return self.graph.version


class GroupFamily:
    """Group indicators over node features, with a declared membership cap m."""

    def __init__(self, groups: Sequence[Callable[[np.ndarray], float]], m: int):
        self.groups = tuple(groups)
        self.m = int(m)

    def __len__(self) -> int:
        return len(self.groups)

    def memberships(self, z) -> np.ndarray:
        v = np.array([1.0 if g(z) else 0.0 for g in self.groups])
        if v.sum() > self.m:
            raise KernelDomainError(f"node belongs to {int(v.sum())} groups, more than m = {self.m}")
        return v

    @classmethod
    def one_hot(cls, size: int, m: int, offset: int = 0) -> "GroupFamily":
        """Group r holds nodes whose feature entry ``offset + r`` is 1."""
        groups = [(lambda z, r=r: z[offset + r] == 1.0) for r in range(size)]
        return cls(groups, m)


# ---------------------------------------------------------------------------
# scalar statistics of a pair


def embeddedness(u: UniverseElement) -> int:
    """|Gamma(i) & Gamma(j)| with closed neighborhoods."""
    return len(u.graph.closed_neighborhood(u.i) & u.graph.closed_neighborhood(u.j))


def pair_neighborhood(u: UniverseElement) -> list:
    return sorted(u.graph.closed_neighborhood(u.i) | u.graph.closed_neighborhood(u.j))


def _refine_colors(nodes, adj, colors):
    """Color refinement; new colors are ranks of (old color, sorted neighbor colors)."""
    while True:
        signature = {v: (colors[v], tuple(sorted(colors[w] for w in adj[v]))) for v in nodes}
        ranks = {sig: r for r, sig in enumerate(sorted(set(signature.values())))}
        refined = {v: ranks[signature[v]] for v in nodes}
        if len(set(refined.values())) == len(set(colors[v] for v in nodes)):
            return refined
        colors = refined


def canonical_form(nodes, edges, marks: dict) -> tuple:
    """Canonical form of a small graph whose nodes carry integer marks.

    Color refinement orders the nodes up to ties, then every ordering inside
    tied classes is tried and the smallest sorted edge list wins.
    """
    nodes = list(nodes)
    adj = {v: set() for v in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    colors = _refine_colors(nodes, adj, {v: marks.get(v, -1) for v in nodes})
    classes = {}
    for v in nodes:
        classes.setdefault(colors[v], []).append(v)
    ordered = [classes[c] for c in sorted(classes)]
    color_seq = tuple(c for c in sorted(classes) for _ in classes[c])
    best = None
    for choice in itertools.product(*(itertools.permutations(cls) for cls in ordered)):
        position = {v: k for k, v in enumerate(itertools.chain.from_iterable(choice))}
        code = tuple(sorted((min(position[a], position[b]), max(position[a], position[b]))
                            for a, b in edges))
        if best is None or code < best:
            best = code
    mark_seq = tuple(sorted(marks.get(v, -1) for v in nodes))
    return (len(nodes), mark_seq, color_seq, best)


def neighborhood_class(u: UniverseElement, max_nodes: int = 10) -> tuple:
    """Canonical form of G[Gamma(i) | Gamma(j)] with i and j marked."""
    nodes = pair_neighborhood(u)
    if len(nodes) > max_nodes:
        raise GraphSizeError(f"pair neighborhood has {len(nodes)} nodes, limit is {max_nodes}")
    return canonical_form(nodes, u.graph.induced_edges(nodes), {u.i: 0, u.j: 1})


def _class_code(form: tuple) -> float:
    """48-bit digest of a canonical form, exactly representable as a float."""
    digest = hashlib.blake2b(repr(form).encode(), digest_size=6).digest()
    return float(int.from_bytes(digest, "big"))


# ---------------------------------------------------------------------------
# kernels on universe elements (prediction-free factors)


class PairGroupsKernel(Kernel):
    """sum over group pairs (g, g') of g(z_i) g'(z_j) g(z_i') g'(z_j')."""

    uses_p = False

    def __init__(self, groups: GroupFamily):
        self.groups = groups
        self.diag_bound = float(groups.m ** 2)

    def encode(self, x, p):
        g = x.graph
        return np.concatenate([self.groups.memberships(g.features(x.i)),
                               self.groups.memberships(g.features(x.j))])

    def cross(self, e, E):
        n = len(self.groups)
        return (E[:, :n] @ e[:n]) * (E[:, n:] @ e[n:])

    def describe(self):
        return "(pair-groups-x)"


class EmbeddednessKernel(Kernel):
    uses_p = False
    diag_bound = 1.0

    def encode(self, x, p):
        return np.array([float(embeddedness(x))])

    def cross(self, e, E):
        return (E[:, 0] == e[0]).astype(float)

    def describe(self):
        return "(embeddedness-x)"


class IsomorphismClassKernel(Kernel):
    uses_p = False
    diag_bound = 1.0

    def __init__(self, max_nodes: int = 10):
        self.max_nodes = int(max_nodes)

    def encode(self, x, p):
        return np.array([_class_code(neighborhood_class(x, self.max_nodes))])

    def cross(self, e, E):
        return (E[:, 0] == e[0]).astype(float)

    def describe(self):
        return f"(isomorphism-x {self.max_nodes})"


class RConvolutionKernel(Kernel):
    """sum over v in Gamma(i) | Gamma(j), v' in Gamma'(i') | Gamma'(j') of k_node(z_v, z_v').

    Encodings pad the neighborhood to ``cap`` nodes with a mask column.
    """

    uses_p = False

    def __init__(self, node_kernel: Kernel, cap: int, feature_dim: int):
        if node_kernel.uses_p:
            raise KernelDomainError("node kernel must act on features only")
        self.node_kernel = node_kernel
        self.cap = int(cap)
        self.feature_dim = int(feature_dim)
        nb = node_kernel.diag_bound
        self.diag_bound = None if nb is None else float(self.cap ** 2 * nb)

    def _node_code(self, z):
        return np.asarray(self.node_kernel.encode(z, None), dtype=float).ravel()

    def encode(self, x, p):
        nodes = pair_neighborhood(x)
        if len(nodes) > self.cap:
            raise GraphSizeError(f"neighborhood of {len(nodes)} nodes exceeds cap {self.cap}")
        codes = [self._node_code(x.graph.features(v)) for v in nodes]
        width = codes[0].size if codes else self._node_code(np.zeros(self.feature_dim)).size
        block = np.zeros((self.cap, width + 1))
        for r, c in enumerate(codes):
            block[r, 0] = 1.0
            block[r, 1:] = c
        return block.ravel()

    def cross(self, e, E):
        width = e.size // self.cap
        mine = e.reshape(self.cap, width)
        theirs = E.reshape(len(E) * self.cap, width)
        mask = theirs[:, 0]
        total = np.zeros(len(E) * self.cap)
        for row in mine:
            if row[0] == 0.0:
                continue
            total += self.node_kernel.cross(row[1:], theirs[:, 1:])
        return (total * mask).reshape(len(E), self.cap).sum(axis=1)

    def describe(self):
        return f"(rconv {self.node_kernel.describe()} {self.cap})"


def build_pair_groups_kernel(groups: GroupFamily, n_bins: int) -> Kernel:
    return ProductKernel([PairGroupsKernel(groups), GridKernel(n_bins)])


def build_embeddedness_kernel(n_bins: int) -> Kernel:
    return ProductKernel([EmbeddednessKernel(), GridKernel(n_bins)])


def build_isomorphism_kernel(n_bins: int, max_nodes: int = 10) -> Kernel:
    return ProductKernel([IsomorphismClassKernel(max_nodes), GridKernel(n_bins)])


# functional forms --------------------------------------------------------


def _same_bin(p, p2, n_bins) -> float:
    grid = GridKernel(n_bins)
    return 1.0 if grid.bin_of(p) == grid.bin_of(p2) else 0.0


def pair_groups_kernel(u, p, u2, p2, groups: GroupFamily, n_bins: int) -> float:
    gi, gj = groups.memberships(u.graph.features(u.i)), groups.memberships(u.graph.features(u.j))
    hi, hj = groups.memberships(u2.graph.features(u2.i)), groups.memberships(u2.graph.features(u2.j))
    return _same_bin(p, p2, n_bins) * float(gi @ hi) * float(gj @ hj)


def embeddedness_kernel(u, p, u2, p2, n_bins: int) -> float:
    return _same_bin(p, p2, n_bins) * (1.0 if embeddedness(u) == embeddedness(u2) else 0.0)


def isomorphism_kernel(u, p, u2, p2, n_bins: int, max_nodes: int = 10) -> float:
    same = neighborhood_class(u, max_nodes) == neighborhood_class(u2, max_nodes)
    return _same_bin(p, p2, n_bins) * (1.0 if same else 0.0)


def r_convolution_kernel(u, u2, node_kernel: Kernel) -> float:
    total = 0.0
    for v in pair_neighborhood(u):
        for w in pair_neighborhood(u2):
            total += node_kernel((u.graph.features(v), None), (u2.graph.features(w), None))
    return total


# ---------------------------------------------------------------------------
# serialization


def write_graph(history: GraphHistory, path) -> None:
    """Line-based format: a node block with features, then 'edge u v version' lines."""
    lines = [GRAPH_FORMAT, f"nodes {history.n_nodes} dim {history.feature_dim or 0}"]
    for v, z in enumerate(history.features):
        lines.append(" ".join(["node", str(v), str(history.node_version[v])] + [repr(float(a)) for a in z]))
    lines.append(f"edges {len(history.edges)}")
    for u, v, version in history.edges:
        lines.append(f"edge {u} {v} {version}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph(path) -> GraphHistory:
    """Rebuild a history; versions are replayed in their recorded order."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != GRAPH_FORMAT:
        raise ValueError(f"{path}: line 1: expected header {GRAPH_FORMAT!r}")
    events = []
    dim = None
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "nodes":
                dim = int(parts[3])
            elif parts[0] == "node":
                events.append((int(parts[2]), "node", int(parts[1]), [float(a) for a in parts[3:]]))
            elif parts[0] == "edge":
                events.append((int(parts[3]), "edge", int(parts[1]), int(parts[2])))
            elif parts[0] != "edges":
                raise ValueError(f"unknown record {parts[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}: line {number}: {exc}") from None
    history = GraphHistory(dim or None)
    for version, kind, a, b in sorted(events, key=lambda ev: ev[0]):
        while history.version < version - 1:
            history.version += 1
        if kind == "node":
            if history.add_node(b) != a:
                raise ValueError(f"{path}: node ids out of order at {a}")
        else:
            history.add_edge(a, b)
        if history.version != version:
            raise ValueError(f"{path}: version mismatch at {kind} {a}")
    return history
