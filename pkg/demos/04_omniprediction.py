"""
One forecast, many losses
=========================

A single stream of forecasts over 8 cells is post-processed for three
losses.  Against five fixed predictors (one is the true conditional
probability) the regret stays far below the guarantee for every loss.
"""

from anykernel import experiments, omni
from anykernel.binary import AnyKernelPredictor
from anykernel.nature import simulate, spawn_seeds

config = experiments.preset("omniprediction", T=3000)
losses, comparators, kd, kh, kernel = experiments.omni_setup(config)
predictor_seed, nature_seed = spawn_seeds(config.seed, 2)
transcript = simulate(experiments.make_nature(config, nature_seed),
                      AnyKernelPredictor(kernel, seed=predictor_seed), config.T)

bound = omni.regret_bound(kd, kh, config.T)
print(f"regret guarantee 2 (B_KDOI + B_KHOI) sqrt(T + 1) = {bound:.0f}")
for loss in losses:
    rep = omni.omni_regret(transcript, loss, comparators)
    print(f"{loss.name:>20}: regret {rep.regret:7.2f} against best comparator "
          f"{comparators.names[rep.best_index]!r}")
