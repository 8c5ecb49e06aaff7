"""Minimum Bayes risk decoding over pre-sampled candidate sets.

Given a multiset of sampled outputs, score every hypothesis by its
expected gain against the evidence under a configurable weighting of the
samples, and select the argmax. Majority-vote self-consistency and range
voting are exposed as special cases; a brute-force oracle over tiny
enumerable distributions backs the test suite and fixture generation.
"""

from .decoder import decode, expected_gains, range_vote, select, self_consistency
from .errors import (
    ConfigError,
    DegenerateWeightsError,
    EmptyEvidenceError,
    EmptyHypothesesError,
    MatrixShapeMismatchError,
    MbrError,
    MissingAnswerError,
    MissingModelIdError,
    MissingScoreError,
    NonFiniteValueError,
    OrderMismatchError,
    ParseError,
    SchemaError,
    ShapeMismatchError,
    SpaceTooLargeError,
    ZeroLengthCandidateError,
)
from .metrics import (
    NgramCounts,
    candidate_tokens,
    gain_matrix,
    ngram_counts,
    pair_gain,
    rouge_kernel,
    tokenize,
)
from .oracle import ToyDistribution, build_fixture_instances
from .types import (
    Candidate,
    DecodeResult,
    GainSpec,
    Instance,
    WeightSpec,
    validate_instance,
)
from .weighting import WeightVector, compute_weights, corrected_score

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "ConfigError",
    "DecodeResult",
    "DegenerateWeightsError",
    "EmptyEvidenceError",
    "EmptyHypothesesError",
    "GainSpec",
    "Instance",
    "MatrixShapeMismatchError",
    "MbrError",
    "MissingAnswerError",
    "MissingModelIdError",
    "MissingScoreError",
    "NgramCounts",
    "NonFiniteValueError",
    "OrderMismatchError",
    "ParseError",
    "SchemaError",
    "ShapeMismatchError",
    "SpaceTooLargeError",
    "ToyDistribution",
    "WeightSpec",
    "WeightVector",
    "ZeroLengthCandidateError",
    "build_fixture_instances",
    "candidate_tokens",
    "compute_weights",
    "corrected_score",
    "decode",
    "expected_gains",
    "gain_matrix",
    "ngram_counts",
    "pair_gain",
    "range_vote",
    "rouge_kernel",
    "select",
    "self_consistency",
    "tokenize",
    "validate_instance",
    "__version__",
]
