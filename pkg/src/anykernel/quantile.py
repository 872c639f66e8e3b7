"""Quantile variant of the Any Kernel predictor for real outcomes in [y_min, y_max].

    S^q_t(p) = sum_{i<t} k((x_t, p), (x_i, p_i)) (1{y_i <= p_i} - q) + 1/2 k((x_t, p), (x_t, p)) (1 - 2q)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .binary import ScalarOnlinePredictor, hedge_bisect, _with_count
from .kernels import Kernel, KernelDomainError
from .transcript import PredictionDistribution, ProtocolError


@dataclass(frozen=True)
class QuantileConfig:
    q: float
    y_min: float = 0.0
    y_max: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"quantile must lie in (0, 1), got {self.q}")
        if not self.y_min < self.y_max:
            raise ValueError("need y_min < y_max")


class QuantilePredictor(ScalarOnlinePredictor):
    """Online q-quantile predictor; the kernel sees predictions in [y_min, y_max]."""

    mode = "quantile"

    def __init__(self, kernel: Kernel, config: QuantileConfig, seed=0):
        super().__init__(kernel, seed)
        self.config = config
        self.transcript.meta.update(q=config.q, y_min=config.y_min, y_max=config.y_max)

    def _self_term(self, p):
        return 1.0 - 2.0 * self.config.q

    def _weight(self, p, y):
        return (1.0 if y <= p else 0.0) - self.config.q

    def _check_outcome(self, y, t):
        y = float(y)
        if not self.config.y_min <= y <= self.config.y_max or math.isnan(y):
            raise ProtocolError(f"outcome {y} outside [{self.config.y_min}, {self.config.y_max}]", t)
        return y

    def s_function(self, x, p):
        if not self.config.y_min <= p <= self.config.y_max:
            raise KernelDomainError(f"prediction {p} outside the outcome range")
        return super().s_function(x, p)

    def predict(self, x) -> PredictionDistribution:
        lo, hi = self.config.y_min, self.config.y_max
        s, counter = self._s_evaluator(x)
        s_lo, s_hi = s(lo), s(hi)
        if s_lo >= 0.0 and s_hi >= 0.0:
            return PredictionDistribution.point(lo, s_q=s_lo, branch="endpoint",
                                                eps=self.epsilon(), evaluations=counter[0])
        if s_lo <= 0.0 and s_hi <= 0.0:
            return PredictionDistribution.point(hi, s_q=s_hi, branch="endpoint",
                                                eps=self.epsilon(), evaluations=counter[0])
        dist = hedge_bisect(s, lo, hi, s_lo, s_hi, self.epsilon)
        return _with_count(dist, counter[0])


def quantile_hedged_product(dist: PredictionDistribution, cdf_q, cdf_q2, q: float) -> float:
    """E_{p, y}[S(p)(1{y <= p} - q)] given the outcome CDF at the support points."""
    if dist.is_point:
        return float(dist.s_q) * (cdf_q - q)
    return dist.tau * dist.s_q * (cdf_q - q) + (1.0 - dist.tau) * dist.s_q2 * (cdf_q2 - q)
