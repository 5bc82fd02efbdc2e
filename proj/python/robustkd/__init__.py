from ._core import (
    ConfigError,
    ContractError,
    bootstrap_pvalue,
    build_manifest,
    cross_entropy,
    ensemble_target,
    filter_premise,
    format_p_value,
    gate,
    premise_prompt,
    run_cli,
    smooth_teacher,
    sq_distill_loss,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "bootstrap_pvalue",
    "build_manifest",
    "cross_entropy",
    "ensemble_target",
    "filter_premise",
    "format_p_value",
    "gate",
    "premise_prompt",
    "run_cli",
    "smooth_teacher",
    "sq_distill_loss",
]
