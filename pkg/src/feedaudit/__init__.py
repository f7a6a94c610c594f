"""Decision-robustness audits of content filtering algorithms."""
from .engine import AuditInput, AuditReport, InputAuditResult, audit_input, decision_robustness_check, run_audit
from .families import (
    Bernoulli,
    Categorical,
    GaussianKnownVar,
    GaussianMeanVar,
    family_from_dict,
    fisher_information,
    make_family,
    mle,
    sample_feed,
    validate_regularity,
)
from .stats import Verdict, audit_threshold, chi_squared_quantile, robustness_decision, wald_statistic

__version__ = "0.1.0"
