"""decompqa: execution and evaluation harness for QDMR-style question decompositions."""

__version__ = "0.1.0"

from .qdmr import Decomposition, DecompStep, OperatorKind, parse_decomposition, render_decomposition, validate
from .strategy import StrategyKind, plan_inputs
from .executor import ExecutionTrace, execute, run_dataset, substitute_refs
from .evalstats import exact_match, normalize_answer, summarize, token_f1, welch_t

__all__ = [
    "Decomposition",
    "DecompStep",
    "ExecutionTrace",
    "OperatorKind",
    "StrategyKind",
    "exact_match",
    "execute",
    "normalize_answer",
    "parse_decomposition",
    "plan_inputs",
    "render_decomposition",
    "run_dataset",
    "substitute_refs",
    "summarize",
    "token_f1",
    "validate",
    "welch_t",
]
