"""Dataset distillation for time-series forecasting."""

from ._core import (
    DdtimeError,
    default_config,
    dft,
    diversity,
    evaluate,
    init_synthetic,
    isib_loss,
    load_buffer,
    load_synthetic,
    mae,
    mse,
    normalize_config,
    param_match_loss,
    sample_probabilities,
    save_synthetic,
    spectral_l1,
    sym_kl,
    total_loss,
    value_combined,
    value_frequency,
    value_temporal,
)

__all__ = [
    "DdtimeError",
    "default_config",
    "dft",
    "diversity",
    "evaluate",
    "init_synthetic",
    "isib_loss",
    "load_buffer",
    "load_synthetic",
    "mae",
    "mse",
    "normalize_config",
    "param_match_loss",
    "sample_probabilities",
    "save_synthetic",
    "spectral_l1",
    "sym_kl",
    "total_loss",
    "value_combined",
    "value_frequency",
    "value_temporal",
]
