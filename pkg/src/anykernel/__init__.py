"""Online prediction that is outcome indistinguishable for any reproducing kernel."""

from .batch import LabeledSample, online_to_batch, online_to_batch_mean, rkhs_ball_learner
from .binary import AnyKernelPredictor, hedged_product
from .config import ConfigError, ExperimentConfig, build_kernel, load_config, loads_config
from .kernels import (
    ConstantKernel,
    GaussianKernel,
    GridKernel,
    Kernel,
    LaplaceKernel,
    LinearKernel,
    LowDegreeBooleanKernel,
    PolynomialKernel,
    ProductKernel,
    ScaledKernel,
    SobolevKernel,
    SumKernel,
    gram_matrix,
)
from .quantile import QuantileConfig, QuantilePredictor
from .transcript import PredictionDistribution, ProtocolError, Round, Transcript
from .vector import OutcomeBox, ScalarMatrixKernel, VectorPredictor

__version__ = "0.1.0"
