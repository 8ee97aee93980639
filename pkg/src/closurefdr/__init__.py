"""E-value multiple testing with FDR control.

Step-up procedures on e-values (eBH and its minimally adaptive variant),
their closed improvements computed by a worst-case dynamic scan, the
Benjamini-Yekutieli procedure with its p-to-e calibrator and closed
version, closure over general error metrics (k-FWER, PFER, FDX, e-Holm),
stochastic rounding and truncation boosting, exhaustive verification
oracles, and a Monte Carlo simulation harness.
"""

from .core import (
    CapacityError,
    ConfigurationError,
    DiscoverySet,
    DomainError,
    ErrorMetric,
    InvariantViolation,
    fdp,
    fdp_tpr,
    metric_value,
)
from .merging import (
    ArithmeticMeanCollection,
    CompoundCollection,
    ExplicitCollection,
    ProductCollection,
    worst_case_mean,
    worst_case_product,
)
from .ebh import (
    EbhResult,
    closed_ebh,
    closed_ebh_compound,
    closed_ebh_product,
    ebh,
    ebh_minimally_adaptive,
    fdr_hat,
    post_hoc_certificate,
)
from .by import (
    ByCalibratorParams,
    by_calibrate,
    by_calibrate_vector,
    by_procedure,
    closed_by,
    harmonic_number,
)
from .closure import (
    ClosureProblem,
    closed_fwer,
    closed_general,
    is_candidate,
    post_hoc_metric_select,
    representation_roundtrip,
    simultaneous_fdp_demo,
)
from .enhance import (
    NullExpectationOracle,
    TruncationGrid,
    boost_factor,
    boosted_closed_ebh,
    randomized_closed_ebh,
    truncate,
)
from .sim import SimConfig, TrialRecord, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ArithmeticMeanCollection", "ByCalibratorParams", "CapacityError",
    "ClosureProblem", "CompoundCollection", "ConfigurationError",
    "DiscoverySet", "DomainError", "EbhResult", "ErrorMetric",
    "ExplicitCollection", "InvariantViolation", "NullExpectationOracle",
    "ProductCollection", "SimConfig", "TrialRecord", "TruncationGrid",
    "boost_factor", "boosted_closed_ebh", "by_calibrate",
    "by_calibrate_vector", "by_procedure", "closed_by", "closed_ebh",
    "closed_ebh_compound", "closed_ebh_product", "closed_fwer",
    "closed_general", "ebh", "ebh_minimally_adaptive", "fdp", "fdp_tpr",
    "fdr_hat", "harmonic_number", "is_candidate", "metric_value",
    "post_hoc_certificate", "post_hoc_metric_select",
    "randomized_closed_ebh", "representation_roundtrip",
    "run_experiment", "simultaneous_fdp_demo", "truncate",
    "worst_case_mean", "worst_case_product",
]
