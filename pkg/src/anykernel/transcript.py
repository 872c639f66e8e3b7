"""Prediction distributions and transcripts shared by every online predictor."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class ProtocolError(RuntimeError):
    """Nature or the caller broke the round protocol."""

    def __init__(self, message: str, round_index: int | None = None):
        if round_index is not None:
            message = f"round {round_index}: {message}"
        super().__init__(message)
        self.round_index = round_index


@dataclass(frozen=True)
class PredictionDistribution:
    """A point mass (tau = 1, q2 = q) or a two-point mix: q with probability tau, else q2.

    The diagnostics (S values at the support, the round's epsilon, the branch
    that produced it, how many times S was evaluated) are kept for auditing.
    Vector predictors put arrays in ``q``/``q2`` and use ``residual`` and
    ``approximate``.
    """

    q: Any
    q2: Any
    tau: float = 1.0
    s_q: Any = None
    s_q2: Any = None
    eps: float = float("nan")
    branch: str = ""
    evaluations: int = 0
    residual: float = 0.0
    approximate: bool = False

    @classmethod
    def point(cls, p, **diagnostics) -> "PredictionDistribution":
        return cls(q=p, q2=p, tau=1.0, **diagnostics)

    @property
    def is_point(self) -> bool:
        return self.tau == 1.0

    def support(self) -> tuple:
        return (self.q,) if self.is_point else (self.q, self.q2)

    def expect(self, fn: Callable[[Any], Any]):
        """E_{p ~ Delta}[fn(p)], evaluated exactly on the support."""
        if self.is_point:
            return fn(self.q)
        return self.tau * fn(self.q) + (1.0 - self.tau) * fn(self.q2)

    def mean(self):
        return self.expect(lambda p: np.asarray(p, dtype=float) if np.ndim(p) else float(p))

    def sample(self, u: float):
        """Map one uniform draw u in [0, 1) to a support point."""
        return self.q if u < self.tau else self.q2


@dataclass
class Round:
    t: int
    x: Any
    dist: PredictionDistribution
    p: Any
    y: Any


@dataclass
class Transcript:
    """Ordered rounds, indexed from 1, plus what is needed to replay them."""

    rounds: list = field(default_factory=list)
    seed: int | None = None
    kernel: str = ""
    mode: str = "binary"
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rounds)

    def __iter__(self):
        return iter(self.rounds)

    def __getitem__(self, index):
        return self.rounds[index]

    def append(self, rnd: Round) -> None:
        expected = len(self.rounds) + 1
        if rnd.t != expected:
            raise ProtocolError(f"expected round index {expected}, got {rnd.t}", rnd.t)
        self.rounds.append(rnd)

    def outcomes(self) -> np.ndarray:
        return np.array([r.y for r in self.rounds], dtype=float)

    def sampled(self) -> np.ndarray:
        return np.array([r.p for r in self.rounds], dtype=float)

    def expected_predictions(self) -> np.ndarray:
        return np.array([r.dist.mean() for r in self.rounds], dtype=float)
