"""Outcome-indistinguishability metrics computed from finished transcripts.

Bound checks use the exact expectation over each round's distribution; the
kernel calibration error uses the sampled predictions, since it scores the
forecasts that were actually delivered.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .graphs import GroupFamily, PairGroupsKernel, UniverseElement
from .kernels import FiniteFamilyKernel, GridKernel, Kernel, LaplaceKernel, ProductKernel
from .transcript import Transcript

SCHEMA_VERSION = 1
RADICAND_TOLERANCE = 1e-9


class PSDViolation(ArithmeticError):
    """A quadratic form that must be nonnegative came out clearly negative."""


@dataclass(frozen=True)
class OiReport:
    name: str
    error: float
    bound: float
    passed: bool


def report(name: str, error: float, bound: float, slack: float = 1e-9) -> OiReport:
    return OiReport(name, float(error), float(bound), bool(abs(error) <= bound + slack))


def oi_error(transcript: Transcript, f: Callable[[Any, Any], float]) -> float:
    """sum_t E_{p ~ Delta_t} (y_t - p) f(x_t, p)."""
    return float(sum(r.dist.expect(lambda p: (r.y - p) * f(r.x, p)) for r in transcript))


def calibration_error(transcript: Transcript) -> float:
    """sum_t (y_t - E p_t)."""
    return float(sum(r.y - r.dist.mean() for r in transcript))


def representer_check(transcript: Transcript, kernel: Kernel, probe) -> OiReport:
    """OI error of f = k(., probe) against ||f|| sqrt(1 + sum_t E p(1-p) k(z_t, z_t))."""
    x_star, p_star = probe
    norm = math.sqrt(max(kernel.diag(x_star, p_star), 0.0))
    e_star = kernel.encode(x_star, p_star if kernel.uses_p else None)
    E_star = kernel.single(e_star)

    def f(x, p):
        return float(kernel.cross(kernel.encode(x, p if kernel.uses_p else None), E_star)[0])

    error = oi_error(transcript, f)
    energy = sum(r.dist.expect(lambda p: p * (1 - p) * kernel.diag(r.x, p)) for r in transcript)
    return report("representer", error, norm * math.sqrt(1.0 + energy))


def constant_check(transcript: Transcript, kernel: Kernel) -> OiReport | None:
    """Calibration error (f = 1) against ||1|| sqrt(1 + sum_t E p(1-p) k(z_t, z_t))."""
    norm = kernel.constant_norm()
    if norm is None:
        return None
    energy = sum(r.dist.expect(lambda p: p * (1 - p) * kernel.diag(r.x, p)) for r in transcript)
    return report("constant", calibration_error(transcript), norm * math.sqrt(1.0 + energy))


def kernel_calibration_error(transcript: Transcript, kernel: Kernel, weights=None) -> float:
    """sqrt(sum_t sum_s w_t w_s k(z_t, z_s)) with w_t = y_t - p_t at the sampled p_t."""
    rounds = list(transcript)
    if not rounds:
        return 0.0
    w = np.array([r.y - r.p for r in rounds], dtype=float) if weights is None else np.asarray(weights, float)
    store = kernel.new_store()
    encodings = []
    for r in rounds:
        e = kernel.encode(r.x, r.p if kernel.uses_p else None)
        encodings.append(e)
        store.append(e)
    E = store.view()
    total = 0.0
    for t, e in enumerate(encodings):
        if w[t] != 0.0:
            total += w[t] * float(kernel.cross(e, E) @ w)
    if total < 0.0:
        if total < -RADICAND_TOLERANCE:
            raise PSDViolation(f"negative quadratic form {total!r}; kernel is not PSD")
        total = 0.0
    return math.sqrt(total)


class GroupIntersectionKernel(FiniteFamilyKernel):
    """sum_g g(x) g(x'): the number of groups two feature vectors share."""

    def __init__(self, groups: GroupFamily):
        super().__init__([(lambda x, p, g=g: 1.0 if g(x) else 0.0) for g in groups.groups],
                         float(groups.m), continuous_in_p=True, uses_p=False, name="groups")


def multicalibration_kernel(groups: GroupFamily, graph_elements: bool) -> Kernel:
    """Laplace kernel on predictions times the group-intersection kernel on features."""
    x_part = PairGroupsKernel(groups) if graph_elements else GroupIntersectionKernel(groups)
    return ProductKernel([x_part, LaplaceKernel(on="p")])


@dataclass(frozen=True)
class MulticalibrationBound:
    kce: float
    reference: float
    table_max: float
    T: int
    m: int


def distance_to_multicalibration_bound(transcript: Transcript, groups: GroupFamily,
                                       n_bins: int) -> MulticalibrationBound:
    """kCE under Laplace x intersection (an upper bound on the distance), with sqrt(mT + 1)."""
    rounds = list(transcript)
    graph = bool(rounds) and isinstance(rounds[0].x, UniverseElement)
    kce = kernel_calibration_error(transcript, multicalibration_kernel(groups, graph))
    table = multicalibration_table(transcript, groups, n_bins)
    table_max = max((abs(row.error) for row in table), default=0.0)
    T = len(rounds)
    return MulticalibrationBound(kce, math.sqrt(groups.m * T + 1), table_max, T, groups.m)


@dataclass(frozen=True)
class CellRow:
    group: int
    group2: int
    bin: int
    error: float
    count: float


def multicalibration_table(transcript: Transcript, groups: GroupFamily, n_bins: int) -> list:
    """Signed error sum E (y - p) and expected count for every (g, g', bin) cell.

    For graph elements g is tested on z_i and g' on z_j; for plain features
    the table has one group axis and ``group2`` is -1.
    """
    grid = GridKernel(n_bins)
    rounds = list(transcript)
    graph = bool(rounds) and isinstance(rounds[0].x, UniverseElement)
    G = len(groups)
    shape = (G, G if graph else 1, n_bins)
    error = np.zeros(shape)
    count = np.zeros(shape)
    for r in rounds:
        if graph:
            gi = groups.memberships(r.x.graph.features(r.x.i))
            gj = groups.memberships(r.x.graph.features(r.x.j))
            cells = np.outer(gi, gj)
        else:
            cells = groups.memberships(r.x)[:, None]
        for p, weight in _support_weights(r.dist):
            b = grid.bin_of(p)
            error[:, :, b] += cells * (weight * (r.y - p))
            count[:, :, b] += cells * weight
    rows = []
    for g in range(shape[0]):
        for g2 in range(shape[1]):
            for b in range(n_bins):
                rows.append(CellRow(g, g2 if graph else -1, b, float(error[g, g2, b]), float(count[g, g2, b])))
    return rows


def _support_weights(dist):
    if dist.is_point:
        return ((dist.q, 1.0),)
    return ((dist.q, dist.tau), (dist.q2, 1.0 - dist.tau))


# ---------------------------------------------------------------------------
# hedging audits, recomputed from the transcript alone


@dataclass(frozen=True)
class HedgingProfile:
    t: np.ndarray
    worst: np.ndarray
    bound: np.ndarray
    zero_mix: np.ndarray
    width: np.ndarray

    @property
    def max_excess(self) -> float:
        return float(np.max(self.worst - self.bound)) if self.t.size else -math.inf


def _recomputed_s(kernel, store, weights, x, p, self_term):
    if weights:
        value = float(kernel.cross(kernel.encode(x, p if kernel.uses_p else None), store.view())
                      @ np.asarray(weights))
    else:
        value = 0.0
    return value + 0.5 * kernel.diag(x, p) * self_term(p)


def hedging_profile(transcript: Transcript, kernel: Kernel) -> HedgingProfile:
    """Per round: max over y in {0, 1} of E_Delta[S_t(p)(y - p)] with S_t recomputed."""
    store = kernel.new_store()
    weights: list = []
    ts, worst, bound, mix, width = [], [], [], [], []
    for r in transcript:
        d = r.dist
        sq = _recomputed_s(kernel, store, weights, r.x, d.q, lambda p: 1 - 2 * p)
        if d.is_point:
            values = [sq * (y - d.q) for y in (0, 1)]
            mix.append(0.0)
            width.append(0.0)
        else:
            sq2 = _recomputed_s(kernel, store, weights, r.x, d.q2, lambda p: 1 - 2 * p)
            values = [d.tau * sq * (y - d.q) + (1 - d.tau) * sq2 * (y - d.q2) for y in (0, 1)]
            mix.append(d.tau * sq + (1 - d.tau) * sq2)
            width.append(abs(d.q2 - d.q))
        ts.append(r.t)
        worst.append(max(values))
        bound.append(1.0 / (10.0 * r.t ** 2))
        store.append(kernel.encode(r.x, r.p if kernel.uses_p else None))
        weights.append(r.y - r.p)
    return HedgingProfile(np.array(ts), np.array(worst), np.array(bound), np.array(mix), np.array(width))


def quantile_lemma_profile(transcript: Transcript, kernel: Kernel, q: float,
                           cdf: Callable[[Any, float], float], rho: float) -> HedgingProfile:
    """Per round E_{p, y}[S^q_t(p)(1{y <= p} - q)] by exact CDF integration.

    ``worst`` holds the signed value on point-mass rounds and its absolute value
    on two-point rounds; ``bound`` is rho / (10 t^2).
    """
    store = kernel.new_store()
    weights: list = []
    ts, worst, bound, mix, width = [], [], [], [], []
    for r in transcript:
        d = r.dist
        sq = _recomputed_s(kernel, store, weights, r.x, d.q, lambda p: 1 - 2 * q)
        if d.is_point:
            worst.append(sq * (cdf(r.x, d.q) - q))
            mix.append(0.0)
            width.append(0.0)
        else:
            sq2 = _recomputed_s(kernel, store, weights, r.x, d.q2, lambda p: 1 - 2 * q)
            value = d.tau * sq * (cdf(r.x, d.q) - q) + (1 - d.tau) * sq2 * (cdf(r.x, d.q2) - q)
            worst.append(abs(value))
            mix.append(d.tau * sq + (1 - d.tau) * sq2)
            width.append(abs(d.q2 - d.q))
        ts.append(r.t)
        bound.append(rho / (10.0 * r.t ** 2))
        store.append(kernel.encode(r.x, r.p if kernel.uses_p else None))
        weights.append((1.0 if r.y <= r.p else 0.0) - q)
    return HedgingProfile(np.array(ts), np.array(worst), np.array(bound), np.array(mix), np.array(width))


def quantile_error(transcript: Transcript, q: float, cdf=None) -> float:
    """sum_t E (1{y_t <= p} - q): over Delta_t with realized y, or over y as well given the CDF."""
    if cdf is None:
        return float(sum(r.dist.expect(lambda p: (1.0 if r.y <= p else 0.0) - q) for r in transcript))
    return float(sum(r.dist.expect(lambda p: cdf(r.x, p) - q) for r in transcript))


# ---------------------------------------------------------------------------
# CSV reports


def write_csv(rows: Sequence[dict], path, fieldnames: Sequence[str] | None = None) -> None:
    """Rows as CSV with a leading schema_version column; floats written with repr."""
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    fieldnames = ["schema_version"] + [f for f in fieldnames if f != "schema_version"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            out = {"schema_version": SCHEMA_VERSION}
            for k in fieldnames[1:]:
                v = row.get(k, "")
                out[k] = repr(float(v)) if isinstance(v, (float, np.floating)) else v
            writer.writerow(out)


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
