"""Named experiment presets and the run / re-evaluate pipeline behind the CLI.

``execute(config)`` runs an experiment and ``metrics_for(config, transcript,
graph)`` scores a transcript.  The CLI's ``eval`` calls the same
``metrics_for`` on a transcript read back from disk, which is why re-evaluation
reproduces the run-time metrics exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import evaluate, nature as nature_mod, omni
from .batch import LabeledSample, rkhs_ball_learner
from .binary import AnyKernelPredictor
from .config import ConfigError, ExperimentConfig, KernelContext, build_kernel, config_from_dict
from .graphs import GraphHistory
from .kernels import Kernel
from .quantile import QuantileConfig, QuantilePredictor
from .transcript import Transcript
from .vector import OutcomeBox, ScalarMatrixKernel, VectorPredictor, vector_bound

OMNI_ETA = (0.1, 0.25, 0.4, 0.5, 0.6, 0.7, 0.85, 0.95)
OMNI_COMPARATORS = (
    OMNI_ETA,
    (0.5,) * 8,
    (0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0),
    (0.2, 0.2, 0.2, 0.2, 0.8, 0.8, 0.8, 0.8),
    (0.95, 0.85, 0.7, 0.6, 0.5, 0.4, 0.25, 0.1),
)

PRESETS: dict[str, dict] = {
    "calibration-adversary": {
        "mode": "binary", "T": 10000, "seed": 0, "kernel": "(const 1)",
        "nature": {"kind": "contrarian_adaptive"},
    },
    "performative": {
        "mode": "binary", "T": 2000, "seed": 0, "kernel": "(sum (const 1) (sobolev))",
        "nature": {"kind": "performative_sigmoid", "a": 1.0, "b": -3.0},
    },
    "low-degree": {
        "mode": "binary", "T": 10000, "seed": 0,
        "kernel": "(product (sum (sobolev) (grid 10)) (lowdeg 2 8))",
        "nature": {"kind": "logistic_of_features", "boolean": True, "bias": 0.2,
                   "weights": [0.8, -0.6, 0.5, 0.0, 0.3, -0.4, 0.0, 0.2], "interaction": 1.0},
    },
    "group-multicalibration": {
        "mode": "linkpred", "T": 20000, "seed": 0, "kernel": "(pair-groups 10)",
        "graph": {"levels": [3, 3], "n_bins": 10},
    },
    "quantile-gaussian": {
        "mode": "quantile", "T": 10000, "seed": 0, "kernel": "(const 1)",
        "quantile": {"q": 0.9, "y_min": 0.0, "y_max": 1.0},
        "nature": {"kind": "lipschitz_real", "family": "truncated_gaussian", "mean": 0.3,
                   "slope": 0.4, "sd": 0.15},
    },
    "omniprediction": {
        "mode": "omni", "T": 10000, "seed": 0,
        "nature": {"kind": "tabulated_cells", "eta": list(OMNI_ETA)},
        "omni": {"losses": ["squared", "absolute", "logistic-truncated"],
                 "comparators": [list(row) for row in OMNI_COMPARATORS],
                 "comparator_names": ["bayes", "half", "threshold", "soft-threshold", "reversed"]},
    },
    "vector-box": {
        "mode": "vector", "T": 300, "seed": 0, "kernel": "(gaussian-p 2.0)",
        "vector": {"lower": [0.0, 0.0], "upper": [1.0, 1.0]},
        "nature": {"kind": "box_contrarian", "noise": 0.2},
    },
    "ball-learner": {
        "mode": "batch", "T": 40, "seed": 0, "kernel": "(gaussian)",
        "batch": {"radius": 1.0, "dim": 3, "noise": 0.1},
    },
}


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in PRESETS[name].items()}
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    data.setdefault("name", name)
    return config_from_dict(data, f"preset {name}")


# ---------------------------------------------------------------------------
# construction


def make_nature(config: ExperimentConfig, seed) -> nature_mod.Nature:
    table = config.table("nature")
    if config.mode == "linkpred":
        g = config.table("graph")
        g.pop("n_bins", None)
        return nature_mod.GraphEvolution(seed=seed, **g)
    kind = table.pop("kind", None)
    if kind is None:
        raise ConfigError("missing key nature.kind")
    try:
        if kind == "contrarian_adaptive":
            return nature_mod.ContrarianAdaptive(seed=seed, **table)
        if kind == "iid_bernoulli":
            return nature_mod.IidBernoulli(seed=seed, **table)
        if kind == "logistic_of_features":
            return nature_mod.LogisticOfFeatures(seed=seed, **table)
        if kind == "performative_sigmoid":
            return nature_mod.PerformativeSigmoid(seed=seed, **table)
        if kind == "tabulated_cells":
            weights = table.pop("cell_weights", None)
            return nature_mod.TabulatedCells(weights=weights, seed=seed, **table)
        if kind == "lipschitz_real":
            q = config.table("quantile")
            table.setdefault("lo", q.get("y_min", 0.0))
            table.setdefault("hi", q.get("y_max", 1.0))
            return nature_mod.LipschitzReal(seed=seed, **table)
        if kind == "box_contrarian":
            v = config.table("vector")
            return nature_mod.BoxContrarian(v["lower"], v["upper"], seed=seed, **table)
    except TypeError as exc:
        raise ConfigError(f"nature {kind!r}: {exc}") from None
    raise ConfigError(f"unknown nature kind {kind!r}")


def kernel_context(config: ExperimentConfig, nature=None) -> KernelContext:
    if config.mode == "linkpred":
        levels = config.table("graph").get("levels", [3, 3])
        groups = nature.groups() if nature is not None else nature_mod.GraphEvolution.groups_for(levels)
        return KernelContext(groups=groups)
    return KernelContext()


def omni_setup(config: ExperimentConfig):
    table = config.table("omni")
    names = table.get("losses", ["squared"])
    losses = []
    for name in names:
        if name not in omni.LOSS_REGISTRY:
            raise ConfigError(f"unknown loss {name!r}")
        if name == "logistic-truncated" and "delta" in table:
            losses.append(omni.logistic_truncated_loss(float(table["delta"])))
        else:
            losses.append(omni.LOSS_REGISTRY[name]())
    rows = table.get("comparators")
    if not rows:
        raise ConfigError("omni.comparators must list at least one tabulated comparator")
    comparators = omni.ComparatorSet.tabulated(rows, table.get("comparator_names"))
    kd, kh, kernel = omni.omni_kernel(losses, comparators)
    return losses, comparators, kd, kh, kernel


def make_kernel(config: ExperimentConfig, nature=None) -> Kernel:
    if config.mode == "omni":
        return omni_setup(config)[4]
    return build_kernel(config.kernel, kernel_context(config, nature))


@dataclass
class RunResult:
    config: ExperimentConfig
    transcript: Transcript | None
    metrics: list
    curve: tuple | None
    graph: GraphHistory | None = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(row["passed"] for row in self.metrics)


def execute(config: ExperimentConfig) -> RunResult:
    """Run the experiment the config describes and score it."""
    if config.mode == "batch":
        return _execute_batch(config)
    predictor_seed, nature_seed = nature_mod.spawn_seeds(config.seed, 2)
    nature = make_nature(config, nature_seed)
    kernel = make_kernel(config, nature)
    if config.mode in ("binary", "linkpred", "omni"):
        predictor = AnyKernelPredictor(kernel, seed=predictor_seed)
    elif config.mode == "quantile":
        q = config.table("quantile")
        predictor = QuantilePredictor(kernel, QuantileConfig(float(q.get("q", 0.5)), float(q.get("y_min", 0.0)),
                                                             float(q.get("y_max", 1.0))), seed=predictor_seed)
    elif config.mode == "vector":
        v = config.table("vector")
        box = OutcomeBox(v["lower"], v["upper"])
        matrix = v.get("matrix", np.eye(box.dim).tolist())
        predictor = VectorPredictor(ScalarMatrixKernel(kernel, matrix), box, seed=predictor_seed,
                                    max_iter=int(v.get("max_iter", 500)))
    else:
        raise ConfigError(f"unsupported mode {config.mode!r}")
    transcript = nature_mod.simulate(nature, predictor, config.T)
    transcript.seed = config.seed
    graph = nature.history if config.mode == "linkpred" else None
    metrics, curve = metrics_for(config, transcript, graph)
    return RunResult(config, transcript, metrics, curve, graph)


def _execute_batch(config: ExperimentConfig) -> RunResult:
    b = config.table("batch")
    rng = np.random.Generator(np.random.Philox(config.seed))
    dim = int(b.get("dim", 3))
    n = config.T
    X = rng.standard_normal((n, dim))
    labels = np.clip(np.tanh(X[:, 0] - 0.5 * X[:, 1]) + float(b.get("noise", 0.1)) * rng.standard_normal(n), -1, 1)
    kernel = make_kernel(config)
    sample = LabeledSample([(x, None) for x in X], labels)
    radius = float(b.get("radius", 1.0))
    sol = rkhs_ball_learner(sample, kernel, radius)
    from .kernels import gram_matrix

    K = gram_matrix(kernel, sample.points).entries
    norm_sq = float(sol.alpha @ K @ sol.alpha)
    rows = [
        _row("ball_value", sol.value, float("nan"), True),
        _row("ball_norm_sq", norm_sq, radius ** 2 * (1 + 1e-9), norm_sq <= radius ** 2 * (1 + 1e-9)),
    ]
    return RunResult(config, None, rows, None, extra={"alpha": sol.alpha, "X": X, "labels": labels})


# ---------------------------------------------------------------------------
# metrics


def _row(metric: str, value: float, bound: float, passed: bool) -> dict:
    return {"metric": metric, "value": float(value), "bound": float(bound), "passed": bool(passed)}


def _probe(config: ExperimentConfig, transcript: Transcript):
    e = config.table("eval")
    x = transcript[0].x if len(transcript) else None
    if "probe_x" in e:
        x = np.asarray(e["probe_x"], dtype=float)
    return x, float(e.get("probe_p", 0.5))


def _binary_curve(transcript: Transcript, kernel: Kernel, probe):
    """Cumulative |OI error| of the plotted probe and the running theorem bound."""
    norm = kernel.constant_norm()
    if norm is not None:
        def f(x, p):
            return 1.0
        label = "f = 1"
    else:
        x_star, p_star = probe
        e_star = kernel.single(kernel.encode(x_star, p_star if kernel.uses_p else None))
        norm = math.sqrt(kernel.diag(x_star, p_star))

        def f(x, p):
            return float(kernel.cross(kernel.encode(x, p if kernel.uses_p else None), e_star)[0])
        label = "f = k(., z*)"
    ts, errs, bounds = [], [], []
    err = 0.0
    energy = 0.0
    for r in transcript:
        err += r.dist.expect(lambda p: (r.y - p) * f(r.x, p))
        energy += r.dist.expect(lambda p: p * (1 - p) * kernel.diag(r.x, p))
        ts.append(r.t)
        errs.append(abs(err))
        bounds.append(norm * math.sqrt(1.0 + energy))
    return label, ts, errs, bounds


def metrics_for(config: ExperimentConfig, transcript: Transcript, graph: GraphHistory | None = None):
    """Metric rows (metric, value, bound, passed) and the plot curve for a finished run."""
    mode = config.mode
    rows = []
    curve = None
    if mode in ("binary", "linkpred"):
        nature = None
        if mode == "linkpred":
            nature = None
        kernel = build_kernel(config.kernel, kernel_context(config, nature))
        rows.append(_row("calibration_error", evaluate.calibration_error(transcript), float("nan"), True))
        const = evaluate.constant_check(transcript, kernel)
        if const is not None:
            rows.append(_row("oi_constant", const.error, const.bound, const.passed))
        probe = _probe(config, transcript)
        if len(transcript):
            rep = evaluate.representer_check(transcript, kernel, probe)
            rows.append(_row("oi_representer", rep.error, rep.bound, rep.passed))
        prof = evaluate.hedging_profile(transcript, kernel)
        worst = float(np.max(prof.worst / prof.bound)) if prof.t.size else 0.0
        rows.append(_row("hedging_ratio_max", worst, 1.0, bool(prof.t.size == 0 or np.all(prof.worst <= prof.bound + 1e-9))))
        if mode == "linkpred":
            groups = kernel_context(config).groups
            n_bins = int(config.table("graph").get("n_bins", 10))
            mc = evaluate.distance_to_multicalibration_bound(transcript, groups, n_bins)
            rows.append(_row("multicalibration_table_max", mc.table_max, mc.reference, mc.table_max <= mc.reference))
            rows.append(_row("kernel_calibration_error", mc.kce, mc.reference, mc.kce <= mc.reference))
        label, ts, errs, bounds = _binary_curve(transcript, kernel, probe)
        curve = (label, ts, errs, bounds)
    elif mode == "quantile":
        kernel = build_kernel(config.kernel)
        q = config.table("quantile")
        qv = float(q.get("q", 0.5))
        nature = make_nature(config, 0)
        energy = sum(r.dist.expect(lambda p: kernel.diag(r.x, p)) for r in transcript)
        norm = kernel.constant_norm()
        err = evaluate.quantile_error(transcript, qv)
        if norm is not None:
            bound = norm * math.sqrt(nature.rho + qv * (1 - qv) * energy)
            rows.append(_row("quantile_error", err, bound, abs(err) <= bound + 1e-9))
        else:
            rows.append(_row("quantile_error", err, float("nan"), True))
        prof = evaluate.quantile_lemma_profile(transcript, kernel, qv, nature.cdf, nature.rho)
        ok = bool(np.all(prof.worst <= prof.bound + 1e-9)) if prof.t.size else True
        ratio = float(np.max(prof.worst / prof.bound)) if prof.t.size else 0.0
        rows.append(_row("quantile_lemma_ratio_max", ratio, 1.0, ok))
        ts, errs, bounds = [], [], []
        run = 0.0
        en = 0.0
        for r in transcript:
            run += r.dist.expect(lambda p: (1.0 if r.y <= p else 0.0) - qv)
            en += r.dist.expect(lambda p: kernel.diag(r.x, p))
            ts.append(r.t)
            errs.append(abs(run))
            bounds.append((norm or 1.0) * math.sqrt(nature.rho + qv * (1 - qv) * en))
        curve = ("f = 1", ts, errs, bounds)
    elif mode == "vector":
        kernel = build_kernel(config.kernel)
        v = config.table("vector")
        box = OutcomeBox(v["lower"], v["upper"])
        mk = ScalarMatrixKernel(kernel, v.get("matrix", np.eye(box.dim).tolist()))
        probe = (transcript[0].x, box.midpoint()) if len(transcript) else (None, box.midpoint())
        weight = np.zeros(box.dim)
        weight[0] = 1.0
        err, bound = vector_bound(transcript, mk, probe, weight)
        rows.append(_row("vector_oi", err, bound, abs(err) <= bound + 1e-9))
        approx = sum(1 for r in transcript if r.dist.approximate)
        rows.append(_row("approximate_rounds", float(approx), float("nan"), True))
        rows.append(_row("residual_sum", float(sum(max(r.dist.residual, 0.0) for r in transcript)),
                         float("nan"), True))
    elif mode == "omni":
        losses, comparators, kd, kh, kernel = omni_setup(config)
        T = len(transcript)
        bound = omni.regret_bound(kd, kh, T)
        for loss in losses:
            rep = omni.omni_regret(transcript, loss, comparators)
            doi = omni.decision_oi_error(transcript, loss)
            hoi = omni.hypothesis_oi_error(transcript, loss, comparators, rep.best_index)
            rows.append(_row(f"regret[{loss.name}]", rep.regret, bound, rep.regret <= bound))
            chain = abs(doi) + abs(hoi)
            rows.append(_row(f"chain[{loss.name}]", rep.regret, chain, rep.regret <= chain + 1e-6))
        prof = evaluate.hedging_profile(transcript, kernel)
        worst = float(np.max(prof.worst / prof.bound)) if prof.t.size else 0.0
        rows.append(_row("hedging_ratio_max", worst, 1.0, bool(np.all(prof.worst <= prof.bound + 1e-9))))
    else:
        raise ConfigError(f"metrics are not defined for mode {mode!r}")
    return rows, curve


def config_from_header(header: dict) -> ExperimentConfig:
    return config_from_dict(header.get("config", {}), "transcript header")
