"""Kernel ridge regression on predicted latent factor inputs.

Core pieces: kernel families and Gram construction (`kernels`), closed-form
and general-loss KRR (`krr`), factor-model simulation and PCA factor
prediction (`factor`), RKHS complexity diagnostics (`complexity`), predictor
evaluation (`riskeval`), and a reproducible experiment harness
(`experiment`, `cli`).
"""

from .kernels import GramMatrix, KernelSpec, eval_kernel, gram, kernel_displacement, median_bandwidth
from .krr import KernelRidge, LossSpec, cross_validate_lambda, fit_general, fit_squared
from .factor import (
    FactorConfig,
    PCAFactorPredictor,
    SampleSet,
    cross_fit_factors,
    eigen_ratio_rank,
    fit_pca_predictor,
    predict_factors,
    simulate,
)
from .complexity import (
    FixedPointResult,
    RademacherEstimate,
    Spectrum,
    complexity_R,
    effective_dimension,
    empirical_spectrum,
    fixed_point,
    rademacher_mc,
    rate_fit,
    statistical_dimension,
)
from .riskeval import RiskReport, empirical_mse, latent_error, procrustes_align, snr
from .experiment import ExperimentConfig, ExperimentReport, ols_fit, run_replication, run_sweep

__version__ = "0.1.0"

__all__ = [
    "GramMatrix", "KernelSpec", "eval_kernel", "gram", "kernel_displacement", "median_bandwidth",
    "KernelRidge", "LossSpec", "cross_validate_lambda", "fit_general", "fit_squared",
    "FactorConfig", "PCAFactorPredictor", "SampleSet", "cross_fit_factors", "eigen_ratio_rank",
    "fit_pca_predictor", "predict_factors", "simulate",
    "FixedPointResult", "RademacherEstimate", "Spectrum", "complexity_R", "effective_dimension",
    "empirical_spectrum", "fixed_point", "rademacher_mc", "rate_fit", "statistical_dimension",
    "RiskReport", "empirical_mse", "latent_error", "procrustes_align", "snr",
    "ExperimentConfig", "ExperimentReport", "ols_fit", "run_replication", "run_sweep",
]
