"""
Vector outcomes in a box
========================

The outcome is a point of [0, 1]^2.  Each round the predictor solves a small
variational inequality; the residual it leaves behind enters the bound.
"""

import numpy as np

from anykernel import GaussianKernel, OutcomeBox, ScalarMatrixKernel, VectorPredictor
from anykernel.nature import BoxContrarian, simulate
from anykernel.vector import vector_bound

box = OutcomeBox([0, 0], [1, 1])
kernel = ScalarMatrixKernel(GaussianKernel(on="p", gamma=2.0), np.eye(2))
transcript = simulate(BoxContrarian(box.lower, box.upper, seed=7), VectorPredictor(kernel, box, seed=8), 200)

residuals = np.array([r.dist.residual for r in transcript])
print(f"largest variational-inequality residual: {residuals.max():.2e}")
for probe_p in ([0.2, 0.2], [0.5, 0.5], [0.8, 0.3]):
    err, bound = vector_bound(transcript, kernel, (None, np.array(probe_p)), [1.0, 0.0])
    print(f"probe at {probe_p}: error {err:+.3f}, bound {bound:.2f}")
