"""
Calibration against an adversary
================================

A contrarian nature answers y = 1 whenever the forecast leans below 1/2 and
y = 0 otherwise.  A deterministic forecaster cannot be calibrated against
it: every forecast below 1/2 is followed by a 1 and every other forecast by
a 0.  The hedging predictor randomizes just enough to stay calibrated.
"""

import math

import numpy as np

from anykernel import AnyKernelPredictor, ConstantKernel, GridKernel, SobolevKernel, SumKernel
from anykernel.evaluate import constant_check, hedging_profile
from anykernel.kernels import grid_bin
from anykernel.nature import ContrarianAdaptive, simulate

T = 5000


def binned_error(ps, ys, n_bins=10):
    """sum over bins of |sum (y - p)| for rounds whose forecast falls in the bin."""
    totals = np.zeros(n_bins)
    for p, y in zip(ps, ys):
        totals[grid_bin(p, n_bins)] += y - p
    return float(np.abs(totals).sum())


# a deterministic forecaster: the running frequency of ones
ps, ys, ones = [], [], 0
for t in range(1, T + 1):
    p = ones / (t - 1) if t > 1 else 0.5
    y = 1 if p < 0.5 else 0
    ps.append(p)
    ys.append(y)
    ones += y
print(f"frequency forecaster: binned calibration error {binned_error(ps, ys):8.1f}")

# the hedging predictor with the grid kernel targets exactly that quantity
transcript = simulate(ContrarianAdaptive(seed=1), AnyKernelPredictor(GridKernel(10), seed=2), T)
print(f"grid kernel:          binned calibration error "
      f"{binned_error([r.p for r in transcript], [r.y for r in transcript]):8.1f}"
      f"   (bound sqrt(10) sqrt(1 + T/4) = {math.sqrt(10) * math.sqrt(1 + T / 4):.0f})")

# with k = 1 only the overall error is controlled, and it stays tiny
transcript = simulate(ContrarianAdaptive(seed=1), AnyKernelPredictor(ConstantKernel(), seed=2), T)
err = sum(r.y - r.dist.mean() for r in transcript)
print(f"constant kernel:      |sum(y - E p)| = {abs(err):.3f}   (bound sqrt(1 + T/4) = {math.sqrt(1 + T / 4):.1f})")

# a richer kernel also controls every smooth function of the prediction
kernel = SumKernel([ConstantKernel(), SobolevKernel()])
transcript = simulate(ContrarianAdaptive(seed=1), AnyKernelPredictor(kernel, seed=2), T)
report = constant_check(transcript, kernel)
print(f"const + Sobolev:      calibration {report.error:.3f} <= {report.bound:.2f}")

# every round's hedge, recomputed from the transcript alone
profile = hedging_profile(transcript, kernel)
print(f"worst hedged product / (1 / 10 t^2) = {np.max(profile.worst / profile.bound):.3g}")
