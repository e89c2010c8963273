from ._stlfmp import (
    Formula,
    chi2_quantile,
    eval_boolean,
    horizon,
    optimize_epsilon,
    parse_formula,
    robustness,
    run_pipeline,
    run_pipeline_mc,
)

__all__ = [
    "Formula",
    "chi2_quantile",
    "eval_boolean",
    "horizon",
    "optimize_epsilon",
    "parse_formula",
    "robustness",
    "run_pipeline",
    "run_pipeline_mc",
]
