"""Exact marginal inference for discrete graphical models.

Message passing over a generalized hypertree decomposition, with a
worst-case optimal multiway factor product as the core kernel, a dense
truth-table baseline, and a per-bag hybrid strategy selector.
"""

from .engine import EngineConfig, InferenceResult, infer_prepared, prepare, run_inference
from .errors import (
    EngineError,
    InconsistentEvidenceError,
    InconsistentModelError,
    IndexOverflowError,
    InferenceTimeoutError,
    OracleGuardError,
    ResourceLimitError,
    UaiFormatError,
)
from .model import (
    FactorTable,
    MarginalSet,
    Model,
    Variable,
    condition_on_evidence,
    factor_sparsity,
)
from .oracle import brute_force_marginals, compare_marginals, induce_sparsity
from .uai import parse_evidence, parse_uai, write_marginals, write_uai

__version__ = "0.1.0"

__all__ = [
    "EngineConfig",
    "EngineError",
    "FactorTable",
    "InconsistentEvidenceError",
    "InconsistentModelError",
    "IndexOverflowError",
    "InferenceResult",
    "InferenceTimeoutError",
    "MarginalSet",
    "Model",
    "OracleGuardError",
    "ResourceLimitError",
    "UaiFormatError",
    "Variable",
    "brute_force_marginals",
    "compare_marginals",
    "condition_on_evidence",
    "factor_sparsity",
    "induce_sparsity",
    "infer_prepared",
    "parse_evidence",
    "parse_uai",
    "prepare",
    "run_inference",
    "write_marginals",
    "write_uai",
]
