import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anykernel.binary import AnyKernelPredictor, hedged_product
from anykernel.kernels import ConstantKernel, GridKernel, LaplaceKernel, ProductKernel, SobolevKernel, SumKernel, GaussianKernel
from anykernel.nature import ContrarianAdaptive, IidBernoulli, PerformativeSigmoid, simulate
from anykernel.transcript import ProtocolError


def naive_s(kernel, rounds, x, p):
    total = sum(kernel((x, p), (r.x, r.p)) * (r.y - r.p) for r in rounds)
    return total + 0.5 * kernel((x, p), (x, p)) * (1 - 2 * p)


def test_cold_start_with_constant_kernel_is_one_half():
    pred = AnyKernelPredictor(ConstantKernel())
    dist = pred.predict(None)
    assert dist.is_point and dist.q == 0.5


def test_s_function_matches_naive_double_loop():
    kernel = SumKernel([SobolevKernel(), ProductKernel([GaussianKernel(gamma=0.5), GridKernel(5)])])
    pred = AnyKernelPredictor(kernel, seed=4)
    rng = np.random.default_rng(0)
    for _ in range(30):
        x = rng.normal(size=2)
        pred.step(x, lambda xx, d: int(rng.random() < 0.3))
    x = rng.normal(size=2)
    for p in (0.0, 0.13, 0.5, 0.77, 1.0):
        assert pred.s_function(x, p) == pytest.approx(naive_s(kernel, pred.transcript.rounds, x, p),
                                                      rel=1e-10, abs=1e-10)


def test_contrarian_calibration_bound_one_seed():
    pred = AnyKernelPredictor(ConstantKernel(), seed=1)
    tr = simulate(ContrarianAdaptive(seed=2), pred, 2000)
    err = sum(r.y - r.dist.mean() for r in tr)
    assert abs(err) <= math.sqrt(1 + 2000 / 4)


def test_iid_half_mean_prediction_is_near_half():
    T = 4000
    pred = AnyKernelPredictor(ConstantKernel(), seed=7)
    tr = simulate(IidBernoulli(0.5, seed=8), pred, T)
    mean = np.mean([r.dist.mean() for r in tr])
    assert abs(mean - 0.5) <= 3 / math.sqrt(T)


def test_performative_sigmoid_feeds_back_expected_prediction():
    nature = PerformativeSigmoid(a=1.0, b=-3.0, seed=0)
    pred = AnyKernelPredictor(SumKernel([ConstantKernel(), SobolevKernel()]), seed=0)
    tr = simulate(nature, pred, 500)
    assert len(tr) == 500


def test_rejects_non_binary_outcome():
    pred = AnyKernelPredictor(ConstantKernel())
    with pytest.raises(ProtocolError, match="round 1"):
        pred.step(None, lambda x, d: 2)


def test_grid_kernel_gives_narrow_two_point_mix():
    pred = AnyKernelPredictor(GridKernel(10), seed=0)
    for t in range(200):
        rnd = pred.step(None, lambda x, d: 1 if d.mean() < 0.37 else 0)
        d = rnd.dist
        if not d.is_point:
            assert d.q2 - d.q <= d.eps
            assert 0 <= d.tau <= 1


def test_same_seed_same_transcript():
    def run():
        pred = AnyKernelPredictor(SobolevKernel(), seed=9)
        tr = simulate(ContrarianAdaptive(seed=3), pred, 300)
        return [(r.p, r.y, r.dist.q, r.dist.q2, r.dist.tau) for r in tr]

    assert run() == run()


KERNELS = st.sampled_from([ConstantKernel(), SobolevKernel(), GridKernel(7), LaplaceKernel(scale=0.3),
                           SumKernel([ConstantKernel(), GridKernel(3)])])


@settings(max_examples=40, deadline=None)
@given(KERNELS, st.integers(0, 2 ** 31), st.floats(0.05, 0.95))
def test_hedged_product_below_per_round_bound(kernel, seed, target):
    pred = AnyKernelPredictor(kernel, seed=seed)
    rng = np.random.default_rng(seed)
    for t in range(1, 80):
        # an adversary mixing contrarian and random behavior
        rnd = pred.step(None, lambda x, d: int(d.mean() < target) if rng.random() < 0.7 else int(rng.random() < 0.5))
        for y in (0, 1):
            assert hedged_product(rnd.dist, y) <= 1 / (10 * t * t) + 1e-9
