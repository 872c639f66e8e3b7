"""Losses, post-processing, and kernels that turn the Any Kernel predictor into an omnipredictor.

A kernel built here is wrapped in ``OIKernel`` which carries two numbers:
``norm_bound`` (F), an upper bound on the RKHS norm of every distinguisher the
kernel is meant to cover, and ``diag_bound`` (D), an upper bound on k(z, z).
The reported parameter is B = F sqrt(D).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import integrate

from .kernels import (
    SOBOLEV_DIAG_MAX,
    ComposedKernel,
    FiniteFamilyKernel,
    Kernel,
    LinearKernel,
    PolynomialKernel,
    ProductKernel,
    SobolevKernel,
    SumKernel,
    zero_kernel,
)
from .transcript import Transcript


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ProperScoring:
    pass


@dataclass(frozen=True)
class StronglyConvex:
    gamma: float


@dataclass(frozen=True)
class FiniteSet:
    pass


@dataclass(frozen=True)
class Separable:
    feature_weight: Callable[[Any], float]
    weight_bound: float


STRATEGIES = ("identity", "closed_form", "convex", "grid")
GRID_POINTS = 1001


@dataclass
class Loss:
    """l(x, yhat, y) for yhat in [0, 1], y in {0, 1}; values clamped to [-1, 1]."""

    name: str
    fn: Callable[[Any, float, int], float]
    strategy: str = "grid"
    closed_form: Callable[[Any, float], float] | None = None
    tags: tuple = ()
    value_range: tuple = (-1.0, 1.0)
    uses_x: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown post-processing strategy {self.strategy!r}")
        if self.strategy == "closed_form" and self.closed_form is None:
            raise ConfigurationError(f"loss {self.name!r} needs a closed form")
        lo, hi = self.value_range
        self.value_range = (max(-1.0, float(lo)), min(1.0, float(hi)))

    def __call__(self, x, yhat, y) -> float:
        return float(min(1.0, max(-1.0, self.fn(x, yhat, y))))

    def derivative(self, x, yhat) -> float:
        """Discrete derivative l(x, yhat, 1) - l(x, yhat, 0)."""
        return self(x, yhat, 1) - self(x, yhat, 0)

    def expected(self, x, yhat, p) -> float:
        return p * self(x, yhat, 1) + (1.0 - p) * self(x, yhat, 0)

    def has(self, tag_type) -> bool:
        return any(isinstance(t, tag_type) for t in self.tags)


def squared_loss() -> Loss:
    return Loss("squared", lambda x, yh, y: (yh - y) ** 2, strategy="identity",
                tags=(ProperScoring(),), value_range=(0.0, 1.0))


def absolute_loss(tags=(FiniteSet(),)) -> Loss:
    return Loss("absolute", lambda x, yh, y: abs(yh - y), strategy="closed_form",
                closed_form=lambda x, p: 1.0 if p > 0.5 else 0.0, tags=tuple(tags),
                value_range=(0.0, 1.0))


def logistic_truncated_loss(delta: float = 0.05, tags=(FiniteSet(),)) -> Loss:
    """Log loss with yhat clipped to [delta, 1 - delta], scaled by 1/log(1/delta) into [0, 1]."""
    scale = math.log(1.0 / delta)

    def fn(x, yh, y):
        c = min(max(yh, delta), 1.0 - delta)
        return -(math.log(c) if y == 1 else math.log(1.0 - c)) / scale

    return Loss("logistic-truncated", fn, strategy="closed_form",
                closed_form=lambda x, p: p, tags=tuple(tags), value_range=(0.0, 1.0))


LOSS_REGISTRY: dict[str, Callable[..., Loss]] = {
    "squared": squared_loss,
    "absolute": absolute_loss,
    "logistic-truncated": logistic_truncated_loss,
}


def post_process(loss: Loss, x, p: float) -> float:
    """A minimizer over yhat in [0, 1] of p l(x, yhat, 1) + (1 - p) l(x, yhat, 0)."""
    p = float(p)
    if loss.strategy == "identity":
        return p
    if loss.strategy == "closed_form":
        return float(loss.closed_form(x, p))
    if loss.strategy == "convex":
        lo, hi = 0.0, 1.0
        while hi - lo > 1e-9:
            a = lo + (hi - lo) / 3.0
            b = hi - (hi - lo) / 3.0
            if loss.expected(x, a, p) <= loss.expected(x, b, p):
                hi = b
            else:
                lo = a
        return 0.5 * (lo + hi)
    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    values = np.array([loss.expected(x, g, p) for g in grid])
    return float(grid[int(np.argmin(values))])


# ---------------------------------------------------------------------------
# kernels with bookkeeping


@dataclass
class OIKernel:
    kernel: Kernel
    norm_bound: float
    diag_bound: float
    parts: tuple = field(default_factory=tuple)

    @property
    def B(self) -> float:
        return float(self.norm_bound * math.sqrt(self.diag_bound))


def sobolev_norm(g: Callable[[float], float], points: int = 20001) -> float:
    """sqrt(int_0^1 g^2 + g'^2) by the trapezoid rule, g' by finite differences."""
    s = np.linspace(0.0, 1.0, points)
    v = np.array([g(a) for a in s])
    h = s[1] - s[0]
    dv = np.diff(v) / h
    mass = integrate.trapezoid(v * v, s)
    return float(math.sqrt(mass + float(np.sum(dv * dv) * h)))


def _sum_oi(parts: Sequence[OIKernel]) -> OIKernel:
    parts = [p for p in parts if p is not None]
    if not parts:
        return OIKernel(zero_kernel(), 0.0, 0.0)
    if len(parts) == 1:
        return parts[0]
    return OIKernel(SumKernel([p.kernel for p in parts]),
                    max(p.norm_bound for p in parts),
                    float(sum(p.diag_bound for p in parts)),
                    tuple(parts))


def kdoi_kernel(losses: Sequence[Loss]) -> OIKernel:
    """Kernel over (x, p) whose RKHS holds p -> dl(x, pi_l(x, p)) for every loss."""
    smooth_norms = []
    finite = []
    for loss in losses:
        if loss.has(ProperScoring):
            if loss.uses_x:
                raise ConfigurationError(f"{loss.name}: proper-scoring tag needs an x-free loss")
            smooth_norms.append(sobolev_norm(lambda p, l=loss: l.derivative(None, post_process(l, None, p))))
        elif loss.has(StronglyConvex):
            gamma = next(t.gamma for t in loss.tags if isinstance(t, StronglyConvex))
            smooth_norms.append(2.0 * (3.0 + 2.0 / gamma))
        elif loss.has(FiniteSet):
            finite.append(loss)
        else:
            raise ConfigurationError(f"loss {loss.name!r} has no class tag")
    parts = []
    if smooth_norms:
        parts.append(OIKernel(SobolevKernel(), max(smooth_norms), SOBOLEV_DIAG_MAX))
    if finite:
        family = [(lambda x, p, l=loss: l.derivative(x, post_process(l, x, p))) for loss in finite]
        m = float(sum((l.value_range[1] - l.value_range[0]) ** 2 for l in finite))
        k = FiniteFamilyKernel(family, m, continuous_in_p=False, uses_p=True, name="decision-family")
        parts.append(OIKernel(k, 1.0, m))
    return _sum_oi(parts)


@dataclass
class ComparatorSet:
    """Finite comparators h: x -> [lo, hi], or a structural class of regression trees."""

    members: tuple = ()
    value_range: tuple = (0.0, 1.0)
    names: tuple = ()
    tree_depth: int | None = None
    tree_arity: int | None = None

    @classmethod
    def regression_trees(cls, depth: int, arity: int) -> "ComparatorSet":
        return cls(tree_depth=int(depth), tree_arity=int(arity))

    @classmethod
    def tabulated(cls, table: Sequence[Sequence[float]], names=None, value_range=(0.0, 1.0)):
        """Comparators given as rows of values indexed by an integer feature."""
        members = tuple((lambda x, row=tuple(float(v) for v in row): row[int(x)]) for row in table)
        return cls(members=members, value_range=value_range,
                   names=tuple(names) if names else tuple(f"h{i}" for i in range(len(table))))

    def evaluate(self, index: int, x) -> float:
        lo, hi = self.value_range
        value = float(self.members[index](x))
        if not lo - 1e-12 <= value <= hi + 1e-12:
            raise ValueError(f"comparator {index} returned {value} outside [{lo}, {hi}]")
        return min(max(value, lo), hi)

    def union(self, other: "ComparatorSet") -> list:
        return [self, other]


def khoi_kernel(losses: Sequence[Loss], comparators) -> OIKernel:
    """Kernel over x whose RKHS holds x -> dl(x, h(x)) for every loss and comparator."""
    if isinstance(comparators, (list, tuple)):
        return _sum_oi([khoi_kernel(losses, c) for c in comparators])
    cs: ComparatorSet = comparators
    if cs.tree_depth is not None:
        d, n = cs.tree_depth, cs.tree_arity
        return OIKernel(PolynomialKernel(d, on="x", bound=float((n + 1) ** d)),
                        float(2 ** d), float((n + 1) ** d))
    if not cs.members:
        return OIKernel(zero_kernel(), 0.0, 0.0)
    lo, hi = cs.value_range
    if any(l.uses_x for l in losses):
        raise ConfigurationError("finite-comparator kernels need x-free losses")
    children = []
    for index in range(len(cs.members)):
        def phi(x, p, index=index):
            return None, (cs.evaluate(index, x) - lo) / (hi - lo)
        children.append(ComposedKernel(SobolevKernel(), phi, phi_continuous=True, uses_p=False,
                                       name=f"h{index}"))
    norms = [sobolev_norm(lambda s, l=l: l.derivative(None, lo + s * (hi - lo))) for l in losses]
    return OIKernel(SumKernel(children), max(norms) if norms else 0.0,
                    len(children) * SOBOLEV_DIAG_MAX)


def separable_wrap(feature_weight: OIKernel, base: OIKernel) -> OIKernel:
    """Product kernel; both the norm and the diagonal bounds multiply."""
    return OIKernel(ProductKernel([feature_weight.kernel, base.kernel]),
                    feature_weight.norm_bound * base.norm_bound,
                    feature_weight.diag_bound * base.diag_bound, (feature_weight, base))


def omni_kernel(losses: Sequence[Loss], comparators) -> tuple[OIKernel, OIKernel, Kernel]:
    """(kdoi, khoi, their sum) ready for the predictor."""
    kd = kdoi_kernel(losses)
    kh = khoi_kernel(losses, comparators)
    return kd, kh, SumKernel([kd.kernel, kh.kernel])


def online_regression_kernel(feature_kernel: Kernel) -> Kernel:
    """k(x, x') + p p' + 1."""
    return SumKernel([feature_kernel, LinearKernel(on="p")])


# ---------------------------------------------------------------------------
# regret accounting, exact over each round's distribution


def algorithm_loss(transcript: Transcript, loss: Loss) -> float:
    total = 0.0
    for r in transcript:
        total += r.dist.expect(lambda p: loss(r.x, post_process(loss, r.x, p), r.y))
    return total


def comparator_losses(transcript: Transcript, loss: Loss, comparators: ComparatorSet) -> np.ndarray:
    if not comparators.members:
        raise ValueError("comparator set is empty")
    out = np.zeros(len(comparators.members))
    for index in range(len(comparators.members)):
        out[index] = sum(loss(r.x, comparators.evaluate(index, r.x), r.y) for r in transcript)
    return out


@dataclass(frozen=True)
class RegretReport:
    algorithm_loss: float
    best_comparator_loss: float
    regret: float
    best_index: int


def omni_regret(transcript: Transcript, loss: Loss, comparators: ComparatorSet) -> RegretReport:
    alg = algorithm_loss(transcript, loss)
    comp = comparator_losses(transcript, loss, comparators)
    best = int(np.argmin(comp))
    return RegretReport(alg, float(comp[best]), alg - float(comp[best]), best)


def decision_oi_error(transcript: Transcript, loss: Loss) -> float:
    """sum_t E (p_t - y_t) dl(x_t, pi_l(x_t, p_t))."""
    return float(sum(r.dist.expect(lambda p: (p - r.y) * loss.derivative(r.x, post_process(loss, r.x, p)))
                     for r in transcript))


def hypothesis_oi_error(transcript: Transcript, loss: Loss, comparators: ComparatorSet, index: int) -> float:
    """sum_t E (p_t - y_t) dl(x_t, h(x_t))."""
    return float(sum(r.dist.expect(lambda p: (p - r.y)) * loss.derivative(r.x, comparators.evaluate(index, r.x))
                     for r in transcript))


def regret_bound(kd: OIKernel, kh: OIKernel, T: int) -> float:
    return 2.0 * (kd.B + kh.B) * math.sqrt(T + 1)
