"""Any Kernel predictor for binary outcomes.

Each round the predictor evaluates

    S_t(p) = sum_{i<t} k((x_t, p), (x_i, p_i)) (y_i - p_i) + 1/2 k((x_t, p), (x_t, p)) (1 - 2p)

and hedges against it: a point mass where S is zero (or has a safe sign at an
endpoint), otherwise a two-point mix around a sign change whose expected
S(p)(y - p) is at most 1/(10 t^2) for either outcome.
"""

from __future__ import annotations

import math

import numpy as np

from .kernels import Kernel
from .transcript import PredictionDistribution, ProtocolError, Round, Transcript

#: bisection gives up on narrowing further once the bracket is this wide
WIDTH_FLOOR = 2.0 ** -53


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator used for sampling predictions."""
    return np.random.Generator(np.random.Philox(seed))


class _Weights:
    """Growable 1-d float buffer."""

    def __init__(self):
        self._buf = np.empty(64)
        self.n = 0

    def append(self, value: float) -> None:
        if self.n == self._buf.size:
            self._buf = np.concatenate([self._buf, np.empty(self._buf.size)])
        self._buf[self.n] = value
        self.n += 1

    def view(self) -> np.ndarray:
        return self._buf[: self.n]


class ScalarOnlinePredictor:
    """History and bookkeeping shared by the binary and quantile predictors."""

    mode = "binary"

    def __init__(self, kernel: Kernel, seed=0):
        self.kernel = kernel
        self.seed = seed
        self.rng = make_rng(seed)
        self.store = kernel.new_store()
        self.weights = _Weights()
        self.max_diag = 0.0
        self.transcript = Transcript(seed=seed if isinstance(seed, int) else None,
                                     kernel=kernel.describe(), mode=self.mode)

    @property
    def t(self) -> int:
        """Index of the round about to be predicted."""
        return self.weights.n + 1

    def epsilon(self) -> float:
        """1 / (10 t^3 B_t), infinite while every kernel value seen is zero."""
        if self.max_diag <= 0.0:
            return math.inf
        return 1.0 / (10.0 * self.t ** 3 * self.max_diag)

    def _history_binding(self, x):
        """Closure p -> (sum_i w_i k((x, p), z_i), k((x, p), (x, p)))."""
        kernel = self.kernel
        if self.weights.n == 0:
            if not kernel.uses_p:
                d = kernel.diag(x, None)
                return lambda p: (0.0, d)
            return lambda p: (0.0, kernel.diag(x, p))
        return kernel.bind(x, self.store.view(), self.weights.view())

    def _self_term(self, p) -> float:
        raise NotImplementedError

    def _weight(self, p, y) -> float:
        raise NotImplementedError

    def _s_evaluator(self, x):
        bound = self._history_binding(x)
        counter = [0]

        def s(p):
            value, d = bound(p)
            counter[0] += 1
            if d > self.max_diag:
                self.max_diag = d
            return value + 0.5 * d * self._self_term(p)

        return s, counter

    def s_function(self, x, p) -> float:
        """Evaluate S_t at candidate prediction p for features x."""
        s, _ = self._s_evaluator(x)
        return s(p)

    def update(self, x, p, y) -> None:
        """Append a finished round to the history."""
        self.store.append(self.kernel.encode(x, p if self.kernel.uses_p else None))
        self.weights.append(self._weight(p, y))
        d = self.kernel.diag(x, p)
        if d > self.max_diag:
            self.max_diag = d

    def load_history(self, rounds) -> None:
        """Replay finished rounds into a fresh history (no prediction, no RNG use)."""
        for rnd in rounds:
            self.update(rnd.x, rnd.p, rnd.y)

    def _check_outcome(self, y, t):
        raise NotImplementedError

    def step(self, x, nature) -> Round:
        """One protocol round: predict, let nature answer, sample, record."""
        t = self.t
        dist = self.predict(x)
        y = self._check_outcome(nature(x, dist), t)
        p = dist.sample(self.rng.random())
        self.update(x, p, y)
        rnd = Round(t=t, x=x, dist=dist, p=p, y=y)
        self.transcript.append(rnd)
        return rnd

    def predict(self, x) -> PredictionDistribution:
        raise NotImplementedError


def hedge_bisect(s, lo, hi, s_lo, s_hi, width, continuous_target=None, evaluations=0, eps=0.0):
    """Bisect [lo, hi] keeping sign S(q) = sign s_lo and sign S(q2) = sign s_hi.

    ``width`` is a callable returning the current allowed bracket width.  With
    ``continuous_target`` (a callable) the search also stops at any midpoint
    where |S| falls below the target and returns a point mass there.  Returns a
    PredictionDistribution; the caller fills in nothing further.
    """
    q, q2, sq, sq2 = lo, hi, s_lo, s_hi
    positive_low = s_lo > 0
    while True:
        if continuous_target is None and q2 - q <= width():
            break
        mid = 0.5 * (q + q2)
        if not q < mid < q2 or q2 - q <= WIDTH_FLOOR:
            break
        sm = s(mid)
        evaluations += 1
        if sm == 0.0:
            return PredictionDistribution.point(mid, s_q=sm, s_q2=sm, eps=width(),
                                                branch="exact-zero", evaluations=evaluations)
        if continuous_target is not None and abs(sm) <= continuous_target():
            return PredictionDistribution.point(mid, s_q=sm, s_q2=sm, eps=width(),
                                                branch="root", evaluations=evaluations)
        if (sm > 0) == positive_low:
            q, sq = mid, sm
        else:
            q2, sq2 = mid, sm
    tau = abs(sq2) / (abs(sq) + abs(sq2))
    branch = "two-point" if continuous_target is None else "two-point-fallback"
    return PredictionDistribution(q=q, q2=q2, tau=tau, s_q=sq, s_q2=sq2, eps=width(),
                                  branch=branch, evaluations=evaluations)


class AnyKernelPredictor(ScalarOnlinePredictor):
    """Online predictor for y in {0, 1} guaranteeing kernel outcome indistinguishability."""

    mode = "binary"

    def _self_term(self, p):
        return 1.0 - 2.0 * p

    def _weight(self, p, y):
        return float(y) - float(p)

    def _check_outcome(self, y, t):
        if isinstance(y, (bool, np.bool_)):
            y = int(y)
        if y not in (0, 1):
            raise ProtocolError(f"binary outcome must be 0 or 1, got {y!r}", t)
        return int(y)

    def predict(self, x) -> PredictionDistribution:
        t = self.t
        s, counter = self._s_evaluator(x)
        s0, s1 = s(0.0), s(1.0)

        def done(dist_kwargs):
            return PredictionDistribution.point(evaluations=counter[0], eps=self.epsilon(),
                                                **dist_kwargs)

        if s0 != 0.0 and s1 != 0.0 and (s0 > 0) == (s1 > 0):
            p = 1.0 if s0 > 0 else 0.0
            return done(dict(p=p, s_q=s0 if p == 0.0 else s1, s_q2=None, branch="endpoint"))
        if s0 == 0.0:
            return done(dict(p=0.0, s_q=0.0, branch="zero-endpoint"))
        if s1 == 0.0:
            return done(dict(p=1.0, s_q=0.0, branch="zero-endpoint"))

        target = None
        if self.kernel.continuous_in_p:
            def target():
                return min(self.epsilon(), 1.0 / (10.0 * t * t))
        dist = hedge_bisect(s, 0.0, 1.0, s0, s1, self.epsilon, target)
        return _with_count(dist, counter[0])


def _with_count(dist: PredictionDistribution, count: int) -> PredictionDistribution:
    return PredictionDistribution(q=dist.q, q2=dist.q2, tau=dist.tau, s_q=dist.s_q,
                                  s_q2=dist.s_q2, eps=dist.eps, branch=dist.branch,
                                  evaluations=count)


def hedged_product(dist: PredictionDistribution, y) -> float:
    """E_{p ~ Delta}[S(p)(y - p)] from the S values recorded on the support."""
    if dist.is_point:
        return 0.0 if dist.s_q is None else float(dist.s_q) * (y - float(dist.q))
    return dist.tau * dist.s_q * (y - dist.q) + (1.0 - dist.tau) * dist.s_q2 * (y - dist.q2)
