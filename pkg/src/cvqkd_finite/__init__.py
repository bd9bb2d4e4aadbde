"""Finite-size secret-key rates for continuous-variable QKD under collective attacks."""

__version__ = "0.1.0"

from .errors import (
    DataFileError,
    DomainError,
    InsufficientSamplesError,
    QuadratureError,
    SmallSampleWarning,
    UnphysicalStateError,
)
from .estimation import (
    EstimationOutcome,
    confidence_bounds,
    covariance_correction,
    effective_excess_noise,
    expected_bounds,
    expected_keyrate_k1,
    keyrate_from_estimates,
    ml_estimators,
    normal_quantile_half,
    required_samples,
    worst_case_cov,
)
from .finite_size import (
    BlockPlan,
    KeyRateReport,
    SecurityBudget,
    delta_n,
    epsilon_total,
    fec_from_beta,
    keyrate_asymptotic,
    keyrate_finite,
    leak_ec,
)
from .gaussian import (
    ChannelModel,
    TwoModeCov,
    build_cov,
    conditional_eigenvalue_homodyne,
    effective_dimension,
    g_entropy,
    holevo_yE,
    mutual_info,
    symplectic_spectrum,
)
from .modulation import ProtocolSpec, Scheme, correlation_excess, correlation_strength, fourstate_lambdas
from .montecarlo import (
    TrialConfig,
    coverage_experiment,
    estimator_distribution_check,
    expected_keyrate_k2,
    sample_pairs,
)
from .scenario import Scenario, epsilon_split, estimate_from_file, optimize_va, scan
