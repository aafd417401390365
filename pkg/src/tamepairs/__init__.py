"""Numerical tools for tameness of pairs of Köthe and power series spaces."""

__version__ = "0.1.0"

from .errors import TamePairsError  # noqa: E402
from .sequences import parse_sequence, check_stability, merge  # noqa: E402
from .spaces import GradedSpace, FiniteVector, vector_norm  # noqa: E402
from .classifier import classify_pair, classify_product  # noqa: E402

__all__ = ["TamePairsError", "parse_sequence", "check_stability", "merge", "GradedSpace",
           "FiniteVector", "vector_norm", "classify_pair", "classify_product", "__version__"]
