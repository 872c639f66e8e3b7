import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anykernel.kernels import ConstantKernel, GaussianKernel, LinearKernel, SobolevKernel, SumKernel
from anykernel.nature import BoxContrarian, LipschitzReal, simulate
from anykernel.quantile import QuantileConfig, QuantilePredictor, quantile_hedged_product
from anykernel.transcript import ProtocolError
from anykernel.vector import (
    FiniteVectorFamilyKernel,
    OutcomeBox,
    ScalarMatrixKernel,
    VectorPredictor,
    block_gram,
    vector_bound,
    vi_residual,
)
from anykernel.kernels import is_psd


# ---------------------------------------------------------------- quantile


def test_truncated_gaussian_rho_bounds_density():
    nature = LipschitzReal(mean=0.3, slope=0.4, sd=0.15)
    assert nature.rho == pytest.approx(5.3194, abs=1e-3)
    # finite-difference density never exceeds rho
    ys = np.linspace(0, 1, 2001)
    for x in (0.0, 0.5, 1.0):
        cdf = np.array([nature.cdf(x, y) for y in ys])
        assert np.max(np.diff(cdf) / np.diff(ys)) <= nature.rho + 1e-6


def test_truncated_gaussian_sampler_matches_cdf():
    nature = LipschitzReal(seed=5)
    ys = np.array([nature.outcome(t, 0.5, None) for t in range(20000)])
    for y in (0.2, 0.5, 0.6, 0.8):
        assert np.mean(ys <= y) == pytest.approx(nature.cdf(0.5, y), abs=0.015)


def test_constant_kernel_quantile_error_stays_within_one():
    nature = LipschitzReal(seed=1)
    pred = QuantilePredictor(ConstantKernel(), QuantileConfig(0.1), seed=2)
    running = 0.0
    for _ in range(2000):
        rnd = pred.step(nature.features(pred.t), lambda x, d: nature.outcome(0, x, d))
        running += rnd.dist.expect(lambda p: (1.0 if rnd.y <= p else 0.0) - 0.1)
        assert abs(running) <= 1.0 + 1e-9


@pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
def test_lemma_bound_with_exact_cdf(q):
    nature = LipschitzReal(seed=3)
    pred = QuantilePredictor(SumKernel([ConstantKernel(), SobolevKernel()]), QuantileConfig(q), seed=4)
    for _ in range(400):
        t = pred.t
        x = nature.features(t)
        rnd = pred.step(x, lambda xx, d: nature.outcome(t, xx, d))
        d = rnd.dist
        value = quantile_hedged_product(d, nature.cdf(x, d.q), nature.cdf(x, d.q2), q)
        if d.is_point:
            assert value <= nature.rho / (10 * t * t) + 1e-9
        else:
            assert abs(value) <= nature.rho / (10 * t * t) + 1e-9


def test_quantile_rejects_out_of_range_outcome():
    pred = QuantilePredictor(ConstantKernel(), QuantileConfig(0.5))
    with pytest.raises(ProtocolError):
        pred.step(None, lambda x, d: 1.5)
    with pytest.raises(ValueError):
        QuantileConfig(1.0)


# ---------------------------------------------------------------- vector


def residual_by_vertices(p, s, box):
    return max(float((v - p) @ s) for v in box.vertices())


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 4), st.data())
def test_vi_residual_matches_vertex_enumeration(d, data):
    floats = st.floats(-5, 5, allow_nan=False)
    lower = np.array(data.draw(st.lists(floats, min_size=d, max_size=d)))
    width = np.array(data.draw(st.lists(st.floats(0.01, 5), min_size=d, max_size=d)))
    box = OutcomeBox(lower, lower + width)
    frac = np.array(data.draw(st.lists(st.floats(0, 1), min_size=d, max_size=d)))
    p = box.lower + frac * width
    s = np.array(data.draw(st.lists(floats, min_size=d, max_size=d)))
    assert vi_residual(p, s, box) == pytest.approx(residual_by_vertices(p, s, box), abs=1e-9)


def test_box_validation():
    with pytest.raises(ValueError):
        OutcomeBox([0, 1], [1, 1])


def test_p_independent_kernel_uses_closed_form():
    box = OutcomeBox([0, 0], [1, 2])
    mk = ScalarMatrixKernel(GaussianKernel(), np.eye(2))
    pred = VectorPredictor(mk, box, seed=0)
    tr = simulate(BoxContrarian(box.lower, box.upper, seed=1), pred, 50)
    for r in tr:
        assert r.dist.branch == "closed-form"
        assert r.dist.residual <= 1e-12


def test_vector_predictor_bound_holds_for_several_probes():
    box = OutcomeBox([0, 0], [1, 1])
    mk = ScalarMatrixKernel(GaussianKernel(on="p", gamma=2.0), [[1.0, 0.3], [0.3, 1.0]])
    pred = VectorPredictor(mk, box, seed=0)
    tr = simulate(BoxContrarian(box.lower, box.upper, seed=1), pred, 150)
    rng = np.random.default_rng(0)
    for _ in range(10):
        probe = (None, rng.random(2))
        err, bound = vector_bound(tr, mk, probe, rng.normal(size=2))
        assert abs(err) <= bound + 1e-9
    assert sum(r.dist.approximate for r in tr) == 0


def test_matrix_kernels_are_psd():
    rng = np.random.default_rng(2)
    family = [lambda x, p: np.array([1.0, p[0]]), lambda x, p: np.array([math.sin(p[1]), x[0]])]
    kernels = [ScalarMatrixKernel(SobolevKernel(), [[2.0, 1.0], [1.0, 1.0]]),
               ScalarMatrixKernel(LinearKernel(on="x"), np.eye(2)),
               FiniteVectorFamilyKernel(family, dim=2, m=2.0)]
    for mk in kernels:
        for _ in range(30):
            n = int(rng.integers(1, 7))
            pts = [(rng.normal(size=2), rng.random(2)) for _ in range(n)]
            if isinstance(mk, ScalarMatrixKernel) and isinstance(mk.kernel, SobolevKernel):
                pts = [(x, float(p[0])) for x, p in pts]
            assert is_psd(block_gram(mk, pts))
