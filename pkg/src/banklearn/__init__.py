"""Bayesian nonparametric kernel learning with random Fourier features.

Learns a shift-invariant kernel by sampling the mixture-of-Gaussians
spectral density of its random Fourier frequencies, scoring frequency
moves by marginal likelihood. Ships fixed-kernel random-feature
baselines, a cross-validation harness, persistence, and a CLI
(console script `bank`).
"""

from .baselines import (
    KernelFamily,
    default_banks,
    family_for_length,
    kernel_closed_form,
    mkl_features,
    mkl_fit_predict,
    ridge_fit,
    rks_fit_predict,
    spectral_sampler_for,
)
from .bench import BenchmarkReport, MethodSpec, run_benchmark
from .classification import (
    GaussianPrior,
    LaplacePosterior,
    evidence_ratio_class,
    fit_laplace,
    laplace_log_evidence,
    log_likelihood_class,
    predict_proba,
    sample_beta_laplace,
)
from .data import (
    Dataset,
    FoldSplit,
    MetricRecord,
    StandardizeRecord,
    kfold_splits,
    load_csv,
    metrics,
    standardize,
    summarize_folds,
    synth_generate,
    synth_spec_default,
    write_csv,
    write_folds_csv,
)
from .errors import (
    ChainDivergedError,
    ConfigError,
    DimensionError,
    InvalidCovarianceError,
    ModelFormatError,
    UndefinedVarianceError,
)
from .model_store import BankModel, BaselineModel, load_model, save_model
from .regression import (
    NigPrior,
    RegressionPosterior,
    build_design,
    fit_posterior,
    log_evidence,
    log_predictive_density,
    predict_mean,
    predict_mean_var,
    swap_frequency_update,
)
from .rff import (
    GaussianMixtureSpec,
    feature_map,
    kernel_estimate,
    kernel_estimate_lags,
    mixture_kernel_eval,
    mixture_pdf,
    sample_frequencies,
)
from .sampler import (
    ChainTrace,
    SamplerConfig,
    Snapshot,
    gibbs_sweep,
    median_pairwise_scale,
    posterior_predict,
    run_chain,
)
from .spectral import (
    ComponentParams,
    NiwPrior,
    SpectralState,
    gibbs_sample_assignments,
    init_spectral_state,
    resample_components,
    state_to_mixture_spec,
)

__version__ = "0.1.0"
