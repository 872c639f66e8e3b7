"""Offline tools: the RKHS-ball learner and online-to-batch conversion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .binary import AnyKernelPredictor, make_rng
from .kernels import Kernel, Point, gram_matrix, psd_margin
from .transcript import PredictionDistribution, Transcript

PSD_TOL = 1e-8


@dataclass(frozen=True)
class LabeledSample:
    points: tuple
    labels: np.ndarray

    def __init__(self, points: Sequence, labels):
        labels = np.asarray(labels, dtype=float).ravel()
        if len(points) == 0 or len(points) != labels.size:
            raise ValueError("sample needs as many labels as points, and at least one")
        if np.any(np.abs(labels) > 1.0):
            raise ValueError("labels must lie in [-1, 1]")
        object.__setattr__(self, "points", tuple(Point(*z) if isinstance(z, tuple) else Point(z, None)
                                                 for z in points))
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class BallSolution:
    alpha: np.ndarray
    value: float


def rkhs_ball_learner_gram(K, y, radius: float, tol: float = 1e-12) -> BallSolution:
    """Maximize (1/n) alpha^T K y subject to alpha^T K alpha <= radius^2.

    By Cauchy-Schwarz in the K inner product the optimum is alpha proportional
    to y, with value (radius / n) sqrt(y^T K y).
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    if radius <= 0:
        raise ValueError("radius must be positive")
    if psd_margin(K, PSD_TOL) < 0:
        raise ValueError("Gram matrix is not PSD within tolerance")
    n = y.size
    energy = float(y @ K @ y)
    if energy <= tol:
        return BallSolution(np.zeros(n), 0.0)
    scale = radius / math.sqrt(energy)
    return BallSolution(scale * y, radius * math.sqrt(energy) / n)


def rkhs_ball_learner(sample: LabeledSample, kernel: Kernel, radius: float) -> BallSolution:
    K = gram_matrix(kernel, sample.points).entries
    return rkhs_ball_learner_gram(K, sample.labels, radius)


def online_to_batch(transcript: Transcript, kernel: Kernel, x, rng=None,
                    index: int | None = None) -> tuple[int, PredictionDistribution]:
    """Pick a round i uniformly, replay rounds 1..i-1, and predict x as round i would."""
    T = len(transcript)
    if T == 0:
        raise ValueError("transcript is empty")
    if index is None:
        rng = make_rng(0) if rng is None else rng
        index = int(rng.integers(1, T + 1))
    if not 1 <= index <= T:
        raise ValueError(f"round index {index} outside 1..{T}")
    predictor = AnyKernelPredictor(kernel)
    predictor.load_history(transcript.rounds[: index - 1])
    return index, predictor.predict(x)


def online_to_batch_mean(transcript: Transcript, kernel: Kernel, x) -> float:
    """Average of E p over every round index; the mean of the randomized predictor."""
    predictor = AnyKernelPredictor(kernel)
    total = 0.0
    for rnd in transcript:
        total += predictor.predict(x).mean()
        predictor.update(rnd.x, rnd.p, rnd.y)
    return total / len(transcript)
