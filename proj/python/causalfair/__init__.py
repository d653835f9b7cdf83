"""Human-in-the-loop causal debiasing of tabular data."""

from ._core import (
    CausalModel,
    DataError,
    Dataset,
    EditError,
    Error,
    SessionService,
    StageError,
    discover,
    evaluate,
    generate_debiased,
    load_csv,
    parse_csv,
    synth_hiring,
)

__all__ = [
    "CausalModel",
    "DataError",
    "Dataset",
    "EditError",
    "Error",
    "SessionService",
    "StageError",
    "discover",
    "evaluate",
    "generate_debiased",
    "load_csv",
    "parse_csv",
    "synth_hiring",
]
