"""Outcome processes ("nature") and the protocol loop.

A nature supplies features for each round, answers with an outcome after
seeing the prediction distribution, and may update its own state from the
sampled prediction.  Every nature draws from its own seeded generator, so a
run is a deterministic function of its seed.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import special, stats

from .binary import make_rng
from .graphs import GraphHistory, GroupFamily, UniverseElement
from .transcript import ProtocolError, Transcript


def sigmoid(a):
    return special.expit(a)


class Nature:
    kind = "nature"
    binary = True

    def __init__(self, seed=0):
        self.rng = make_rng(seed)

    def features(self, t: int):
        return None

    def outcome(self, t: int, x, dist):
        raise NotImplementedError

    def observe(self, t: int, x, p, y) -> None:
        pass


class IidBernoulli(Nature):
    kind = "iid_bernoulli"

    def __init__(self, theta: float = 0.5, seed=0):
        super().__init__(seed)
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        self.theta = float(theta)

    def outcome(self, t, x, dist):
        return int(self.rng.random() < self.theta)


class LogisticOfFeatures(Nature):
    """x ~ N(0, I) (or uniform on {-1, 1}^n with ``boolean``); y ~ Ber(sigmoid(w.x + b))."""

    kind = "logistic_of_features"

    def __init__(self, weights: Sequence[float], bias: float = 0.0, boolean: bool = False,
                 interaction: float = 0.0, seed=0):
        super().__init__(seed)
        self.weights = np.asarray(weights, dtype=float)
        self.bias = float(bias)
        self.boolean = boolean
        self.interaction = float(interaction)

    def features(self, t):
        n = self.weights.size
        if self.boolean:
            return np.where(self.rng.random(n) < 0.5, -1.0, 1.0)
        return self.rng.standard_normal(n)

    def probability(self, x) -> float:
        a = self.bias + float(self.weights @ x)
        if self.interaction and x.size >= 2:
            a += self.interaction * x[0] * x[1]
        return float(sigmoid(a))

    def outcome(self, t, x, dist):
        return int(self.rng.random() < self.probability(x))


class ContrarianAdaptive(Nature):
    """y_t = 1{E p_t < 1/2}: always bets against the forecast."""

    kind = "contrarian_adaptive"

    def outcome(self, t, x, dist):
        return int(dist.mean() < 0.5)


class PerformativeSigmoid(Nature):
    """y_t ~ Ber(sigmoid(a + b E p_t)); the forecast moves the outcome odds."""

    kind = "performative_sigmoid"

    def __init__(self, a: float = 0.0, b: float = -4.0, seed=0):
        super().__init__(seed)
        self.a, self.b = float(a), float(b)

    def outcome(self, t, x, dist):
        return int(self.rng.random() < sigmoid(self.a + self.b * dist.mean()))


class TabulatedCells(Nature):
    """x uniform over cells 0..K-1 (with given weights); y ~ Ber(eta[x])."""

    kind = "tabulated_cells"

    def __init__(self, eta: Sequence[float], weights: Sequence[float] | None = None, seed=0):
        super().__init__(seed)
        self.eta = np.asarray(eta, dtype=float)
        w = np.ones(self.eta.size) if weights is None else np.asarray(weights, dtype=float)
        self.cum = np.cumsum(w / w.sum())

    def features(self, t):
        return int(min(np.searchsorted(self.cum, self.rng.random(), side="right"), self.eta.size - 1))

    def outcome(self, t, x, dist):
        return int(self.rng.random() < self.eta[x])


# ---------------------------------------------------------------------------
# real-valued outcomes with a Lipschitz CDF


class LipschitzReal(Nature):
    """Real outcomes in [lo, hi] whose conditional CDF is rho-Lipschitz.

    ``family='truncated_gaussian'``: y ~ N(mu(x), sd^2) truncated to [lo, hi]
    with mu(x) = mean + slope * x and x ~ U[0, 1]; mu stays inside [lo, hi]
    and rho = 1 / (sd sqrt(2 pi) (Phi((hi - lo) / sd) - 1/2)).

    ``family='beta_mixture'``: y = lo + (hi - lo) B with B a mixture of Beta
    laws (all shape parameters >= 1); rho is the weighted sum of each
    component's peak density over (hi - lo).  Features are unused.
    """

    kind = "lipschitz_real"
    binary = False

    def __init__(self, family: str = "truncated_gaussian", lo: float = 0.0, hi: float = 1.0,
                 mean: float = 0.3, slope: float = 0.4, sd: float = 0.15,
                 components: Sequence[tuple] = ((0.5, 2.0, 5.0), (0.5, 5.0, 2.0)), seed=0):
        super().__init__(seed)
        self.family = family
        self.lo, self.hi = float(lo), float(hi)
        if family == "truncated_gaussian":
            self.mean, self.slope, self.sd = float(mean), float(slope), float(sd)
            for m in (self.mean, self.mean + self.slope):
                if not self.lo <= m <= self.hi:
                    raise ValueError("mean must stay inside [lo, hi]")
            width = self.hi - self.lo
            self.rho = 1.0 / (self.sd * math.sqrt(2 * math.pi) * (special.ndtr(width / self.sd) - 0.5))
        elif family == "beta_mixture":
            comps = [(float(w), float(a), float(b)) for w, a, b in components]
            total = sum(w for w, _, _ in comps)
            self.components = [(w / total, a, b) for w, a, b in comps]
            if any(a < 1 or b < 1 for _, a, b in self.components):
                raise ValueError("beta shapes must be >= 1 for a bounded density")
            self.rho = sum(w * _beta_peak(a, b) for w, a, b in self.components) / (self.hi - self.lo)
        else:
            raise ValueError(f"unknown family {family!r}")

    def features(self, t):
        if self.family == "truncated_gaussian":
            return float(self.rng.random())
        return None

    def _tg_bounds(self, x):
        mu = self.mean + self.slope * x
        return mu, special.ndtr((self.lo - mu) / self.sd), special.ndtr((self.hi - mu) / self.sd)

    def cdf(self, x, y) -> float:
        """P(Y <= y | x), exact."""
        if y <= self.lo:
            return 0.0
        if y >= self.hi:
            return 1.0
        if self.family == "truncated_gaussian":
            mu, a, b = self._tg_bounds(x)
            return float((special.ndtr((y - mu) / self.sd) - a) / (b - a))
        s = (y - self.lo) / (self.hi - self.lo)
        return float(sum(w * stats.beta.cdf(s, a, b) for w, a, b in self.components))

    def outcome(self, t, x, dist):
        u = self.rng.random()
        if self.family == "truncated_gaussian":
            mu, a, b = self._tg_bounds(x)
            y = mu + self.sd * special.ndtri(a + u * (b - a))
        else:
            cum = np.cumsum([w for w, _, _ in self.components])
            idx = int(min(np.searchsorted(cum, u, side="right"), len(cum) - 1))
            _, a, b = self.components[idx]
            y = self.lo + (self.hi - self.lo) * stats.beta.ppf(self.rng.random(), a, b)
        return float(min(max(y, self.lo), self.hi))


def _beta_peak(a: float, b: float) -> float:
    if a == 1.0 and b == 1.0:
        return 1.0
    mode = (a - 1.0) / (a + b - 2.0)
    return float(stats.beta.pdf(mode, a, b))


# ---------------------------------------------------------------------------
# vector outcomes


class BoxContrarian(Nature):
    """Vector outcomes on a box: each coordinate goes to the far side of the forecast, with noise."""

    kind = "box_contrarian"
    binary = False

    def __init__(self, lower, upper, noise: float = 0.2, seed=0):
        super().__init__(seed)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.noise = float(noise)

    def features(self, t):
        return self.rng.standard_normal(self.lower.size)

    def outcome(self, t, x, dist):
        mid = 0.5 * (self.lower + self.upper)
        p = np.asarray(dist.mean(), dtype=float)
        far = np.where(p < mid, self.upper, self.lower)
        flip = self.rng.random(self.lower.size) < self.noise
        return np.where(flip, self.lower + self.upper - far, far)


# ---------------------------------------------------------------------------
# evolving graph


class GraphEvolution(Nature):
    """Link formation on a growing graph.

    Nodes carry two categorical attributes, one-hot encoded (``levels`` sets
    their sizes).  Each round a new node may arrive and attach by
    preferential attachment.  A candidate pair (i, j) is then proposed: i is
    uniform, j is a friend of a friend half the time and a
    preferential-attachment draw otherwise.  The link forms with probability

        sigmoid(base + homophily * #shared attributes + closure * #common neighbors
                + attachment * log(1 + deg j))

    and, if it forms, the edge is added for later rounds.
    """

    kind = "graph_evolution"

    def __init__(self, levels: Sequence[int] = (3, 3), initial_nodes: int = 30,
                 initial_edges: int = 45, arrival: float = 0.05, base: float = -2.0,
                 homophily: float = 1.0, closure: float = 0.4, attachment: float = 0.3,
                 seed=0):
        super().__init__(seed)
        self.levels = tuple(int(v) for v in levels)
        self.arrival = float(arrival)
        self.base, self.homophily = float(base), float(homophily)
        self.closure, self.attachment = float(closure), float(attachment)
        self.history = GraphHistory(sum(self.levels))
        self._endpoints: list[int] = []
        for _ in range(int(initial_nodes)):
            self._new_node(attach=False)
        n = self.history.n_nodes
        added = 0
        while added < int(initial_edges) and n > 1:
            u, v = (int(a) for a in self.rng.integers(0, n, size=2))
            if u != v and not self.history.adjacent_now(u, v):
                self._link(u, v)
                added += 1

    def groups(self) -> GroupFamily:
        """One group per attribute level; every node is in exactly len(levels) groups."""
        return self.groups_for(self.levels)

    @staticmethod
    def groups_for(levels: Sequence[int]) -> GroupFamily:
        return GroupFamily.one_hot(sum(int(v) for v in levels), m=len(levels))

    def _attributes(self) -> np.ndarray:
        z = np.zeros(sum(self.levels))
        offset = 0
        for size in self.levels:
            z[offset + int(self.rng.integers(0, size))] = 1.0
            offset += size
        return z

    def _pa_draw(self) -> int:
        return self._endpoints[int(self.rng.integers(0, len(self._endpoints)))]

    def _new_node(self, attach: bool) -> int:
        target = self._pa_draw() if attach and self._endpoints else None
        v = self.history.add_node(self._attributes())
        self._endpoints.append(v)
        if target is not None:
            self._link(v, target)
        return v

    def _link(self, u, v):
        self.history.add_edge(u, v)
        self._endpoints.extend((u, v))

    def _candidate(self):
        n = self.history.n_nodes
        for _ in range(100):
            i = int(self.rng.integers(0, n))
            nbrs = self.history.neighbors_now(i)
            if nbrs and self.rng.random() < 0.5:
                k = nbrs[int(self.rng.integers(0, len(nbrs)))]
                second = self.history.neighbors_now(k)
                j = second[int(self.rng.integers(0, len(second)))]
            else:
                j = self._pa_draw()
            if j != i and not self.history.adjacent_now(i, j):
                return i, j
        raise ProtocolError("could not find a non-adjacent candidate pair")

    def features(self, t):
        if self.rng.random() < self.arrival:
            self._new_node(attach=True)
        i, j = self._candidate()
        return UniverseElement(i, j, self.history.snapshot())

    def link_probability(self, u: UniverseElement) -> float:
        zi, zj = self.history.features[u.i], self.history.features[u.j]
        shared = float(zi @ zj)
        common = len(set(self.history.neighbors_now(u.i)) & set(self.history.neighbors_now(u.j)))
        deg = self.history.degree_now(u.j)
        a = self.base + self.homophily * shared + self.closure * common + self.attachment * math.log1p(deg)
        return float(sigmoid(a))

    def outcome(self, t, x, dist):
        return int(self.rng.random() < self.link_probability(x))

    def observe(self, t, x, p, y):
        if y == 1:
            self._link(x.i, x.j)


def simulate(nature: Nature, predictor, T: int) -> Transcript:
    """Run T rounds of the protocol and return the predictor's transcript."""
    for _ in range(int(T)):
        t = predictor.t
        x = nature.features(t)
        rnd = predictor.step(x, lambda xx, dist: nature.outcome(t, xx, dist))
        nature.observe(t, rnd.x, rnd.p, rnd.y)
    return predictor.transcript


def spawn_seeds(seed: int, n: int = 2) -> list:
    """Independent child seeds: by convention [predictor, nature, ...]."""
    return np.random.SeedSequence(int(seed)).spawn(n)
