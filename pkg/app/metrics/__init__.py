from app.metrics.divergence import (
    EPS_FLOOR,
    PersonalizationSpec,
    PersonalizedPrivacy,
    kl_divergence,
    kl_rows,
    personalized_components,
    personalized_privacy,
    privacy,
    privacy_norm,
    utility_gain_norm,
    utility_loss,
    validate_distribution,
)
from app.metrics.information import (
    SparseJoint,
    conditional_mutual_information,
    discrete_mutual_information,
    entropy,
)
from app.metrics.normalization import NormalizationConstants, estimate_norms

__all__ = [
    "EPS_FLOOR",
    "PersonalizationSpec",
    "PersonalizedPrivacy",
    "NormalizationConstants",
    "kl_divergence",
    "kl_rows",
    "privacy",
    "privacy_norm",
    "utility_loss",
    "utility_gain_norm",
    "personalized_privacy",
    "personalized_components",
    "validate_distribution",
    "estimate_norms",
    "discrete_mutual_information",
    "conditional_mutual_information",
    "entropy",
    "SparseJoint",
]
