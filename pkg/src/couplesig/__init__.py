"""couplesig: ECG-to-PCG coupling filter estimation.

A numpy/scipy library for recovering the latent linear filter that maps an
electrocardiogram to a phonocardiogram. Provides an optimal-transport
distribution-matching estimator, four classical deconvolution baselines,
synthetic instance generation with known ground truth, and a benchmark
suite for noise-robustness experiments.
"""

from .deconv import (
    DeconvConfig,
    deconv_naive,
    deconv_sparse,
    deconv_tikhonov,
    deconv_wiener,
)
from .experiments import (
    BenchmarkRow,
    ConsistencyRow,
    ExperimentConfig,
    estimate_with_method,
    run_benchmark,
    run_consistency,
    summarize,
)
from .metrics import (
    CoherenceReport,
    ConsistencyReport,
    coherence,
    consistency_eval,
    filter_mse,
    filter_pcc,
)
from .nmcse import NmcseConfig, TrainedCoupler, nmcse_gradient, nmcse_loss, refine, train
from .ot import (
    CostParams,
    EmpiricalDistribution,
    SinkhornConfig,
    TransportPlan,
    build_distribution,
    cost_matrix,
    exact_ot,
    plan_weighted_cost_gradient,
    sinkhorn,
)
from .signals import (
    ButterworthSpec,
    FirFilter,
    Signal,
    butterworth_filter,
    convolve,
    mix_at_snr,
    resample,
    segment,
    z_score,
)
from .synth import SynthPair, SynthSpec, gen_ecg, gen_pair, gen_true_filter

__version__ = "0.1.0"

__all__ = [
    "Signal", "FirFilter", "ButterworthSpec",
    "z_score", "butterworth_filter", "convolve", "segment", "mix_at_snr", "resample",
    "SynthSpec", "SynthPair", "gen_ecg", "gen_true_filter", "gen_pair",
    "DeconvConfig", "deconv_naive", "deconv_tikhonov", "deconv_wiener", "deconv_sparse",
    "EmpiricalDistribution", "CostParams", "SinkhornConfig", "TransportPlan",
    "build_distribution", "cost_matrix", "sinkhorn", "exact_ot",
    "plan_weighted_cost_gradient",
    "NmcseConfig", "TrainedCoupler", "nmcse_loss", "nmcse_gradient", "train", "refine",
    "CoherenceReport", "ConsistencyReport",
    "filter_mse", "filter_pcc", "coherence", "consistency_eval",
    "ExperimentConfig", "BenchmarkRow", "ConsistencyRow",
    "run_benchmark", "run_consistency", "estimate_with_method", "summarize",
    "__version__",
]
