"""Differentially private samplers for Gaussian and product distributions."""

from privsample.budget import PrivacyBudget, basic_composition
from privsample.errors import InvalidInputError, ParseError, SingularMatrixError
from privsample.profile import ConstantsProfile

__all__ = [
    "ConstantsProfile",
    "InvalidInputError",
    "ParseError",
    "PrivacyBudget",
    "SingularMatrixError",
    "basic_composition",
]
