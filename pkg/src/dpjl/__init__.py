"""Differentially private Johnson-Lindenstrauss sketches.

Seeded JL transforms (sparse block construction, Hadamard-based fast
transform, dense Gaussian baseline) with exact sensitivity calibration for
the Laplace and Gaussian mechanisms, bias-corrected unbiased estimators for
squared Euclidean distance, and verification machinery (exhaustive oracle +
seeded Monte Carlo) for the mean/variance identities behind them.
"""

from .errors import (
    DimMismatch,
    DpjlError,
    GaussianNeedsDelta,
    IncompatibleSketches,
    InvalidAccuracy,
    InvalidBlockStructure,
    InvalidPrivacy,
    InvalidScale,
    NotPowerOfTwo,
    PrivacyRegimeWarning,
    SchemeMismatch,
    TooManyConfigs,
)
from .estimators import (
    EstimateReport,
    VariancePrediction,
    analytic_noise_terms,
    analytic_variance,
    bias_term,
    estimate_sqdist,
    noise_moment,
    optimal_k,
)
from .fwht import fwht, next_pow2, pad_pow2
from .harness import bench_time, bench_variance, estimator_sampler, spread_vector
from .oracle import OracleResult, enumerate_sjlt_moments, mc_moments
from .privacy import (
    NoiseSpec,
    PrivacyParams,
    PrivateSketch,
    SensitivityPair,
    calibrate,
    calibrate_gaussian,
    calibrate_laplace,
    load_sketch,
    privatize,
    privatize_input_fjlt,
    save_sketch,
    select_mechanism,
)
from .rng import Rng, derive_stream, sample_gaussian, sample_laplace
from .transforms import (
    FjltTransform,
    IidGaussianTransform,
    SjltTransform,
    SketchParams,
    column_sensitivity,
    load_transform,
    params_from_accuracy,
    save_transform,
    transform_fingerprint,
)

__version__ = "0.1.0"
