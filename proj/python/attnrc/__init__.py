"""Delay-based reservoir computing with attention readouts.

The compiled core exposes dataset builders (UCTLS, ALRS), the
Lang-Kobayashi and leaky-ESN reservoir backends, ridge and attention
readout training, and the prediction-quality metrics (NRMSE, VPT,
power spectra).
"""

from ._core import (
    ConfigError,
    DatasetSplit,
    EsnParams,
    LaserParams,
    LinearAttention,
    LossCurve,
    Mask,
    NonlinearAttention,
    NumericalError,
    RidgeWeights,
    StandardizationStats,
    StateMatrix,
    Trajectory,
    __version__,
    build_alrs,
    build_uctls,
    largest_lyapunov,
    make_mask,
    mask_input,
    nrmse,
    power_spectrum,
    predict_ridge,
    run_lang_kobayashi,
    run_leaky_esn,
    standardize_states,
    standardize_states_with,
    train_attention,
    train_ridge,
    vpt,
)

__all__ = [
    "ConfigError",
    "DatasetSplit",
    "EsnParams",
    "LaserParams",
    "LinearAttention",
    "LossCurve",
    "Mask",
    "NonlinearAttention",
    "NumericalError",
    "RidgeWeights",
    "StandardizationStats",
    "StateMatrix",
    "Trajectory",
    "__version__",
    "build_alrs",
    "build_uctls",
    "largest_lyapunov",
    "make_mask",
    "mask_input",
    "nrmse",
    "power_spectrum",
    "predict_ridge",
    "run_lang_kobayashi",
    "run_leaky_esn",
    "standardize_states",
    "standardize_states_with",
    "train_attention",
    "train_ridge",
    "vpt",
]
