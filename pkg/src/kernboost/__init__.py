"""L2 boosting of Nadaraya-Watson kernel regression."""

from .estimators import BoostedKernelRegressor, HigherOrderKernelRegressor
from .kernels import (
    EPANECHNIKOV,
    GAUSSIAN,
    GaussianMixture,
    PlainKernel,
    ScaledKernel,
    TabulatedKernel,
    convolve,
    eval_kernel,
    get_kernel,
    higher_order_kernel,
    kernel_moment,
)
from .smoother import (
    BoostFit,
    EmptyNeighborhoodError,
    FitConfig,
    Sample,
    WeightProfile,
    boosted_weights,
    fit_boosted,
    higher_order_fit,
    nw_weights,
    predict,
    smoother_matrix,
)

__all__ = [
    "BoostedKernelRegressor",
    "HigherOrderKernelRegressor",
    "EPANECHNIKOV",
    "GAUSSIAN",
    "GaussianMixture",
    "PlainKernel",
    "ScaledKernel",
    "TabulatedKernel",
    "convolve",
    "eval_kernel",
    "get_kernel",
    "higher_order_kernel",
    "kernel_moment",
    "BoostFit",
    "EmptyNeighborhoodError",
    "FitConfig",
    "Sample",
    "WeightProfile",
    "boosted_weights",
    "fit_boosted",
    "higher_order_fit",
    "nw_weights",
    "predict",
    "smoother_matrix",
]

__version__ = "0.1.0"
