"""Privacy-preserving time-of-use billing over Pedersen commitments."""

from .group import (
    DEFAULT_DOMAIN_TAG,
    GroupParams,
    PROD_GROUP_ID,
    TEST_GROUP_ID,
    derive_params,
    system_rng,
)
from .pedersen import commit, fold_commitments, hom_combine, hom_scale, open_commitment

__all__ = [
    "DEFAULT_DOMAIN_TAG",
    "GroupParams",
    "PROD_GROUP_ID",
    "TEST_GROUP_ID",
    "derive_params",
    "system_rng",
    "commit",
    "open_commitment",
    "hom_combine",
    "hom_scale",
    "fold_commitments",
]
