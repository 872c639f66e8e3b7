"""
From online transcripts to batch predictors
===========================================

A transcript can be turned into a batch predictor by replaying a random
prefix.  Separately, the RKHS-ball learner finds the function of norm at
most r most correlated with labels.
"""

import numpy as np

from anykernel import AnyKernelPredictor, GaussianKernel, LabeledSample, build_kernel, rkhs_ball_learner
from anykernel.batch import online_to_batch, online_to_batch_mean
from anykernel.nature import LogisticOfFeatures, simulate

nature = LogisticOfFeatures([1.5, -1.0], seed=9)
kernel = build_kernel("(product (sum (const 1) (sobolev)) (gaussian))")
transcript = simulate(nature, AnyKernelPredictor(kernel, seed=10), 600)

x = np.array([0.8, -0.4])
index, dist = online_to_batch(transcript, kernel, x, rng=np.random.default_rng(0))
print(f"replayed prefix of {index - 1} rounds, prediction {dist.mean():.3f}")
print(f"averaged over all prefixes: {online_to_batch_mean(transcript, kernel, x):.3f}")
print(f"true probability: {nature.probability(x):.3f}")

rng = np.random.default_rng(1)
X = rng.normal(size=(60, 2))
y = np.clip(np.sin(X[:, 0]), -1, 1)
sol = rkhs_ball_learner(LabeledSample([(v, None) for v in X], y), GaussianKernel(), radius=1.0)
print(f"ball learner correlation with labels: {sol.value:.3f}")
