"""Simulation toolkit for anti-copy multilevel 2D barcodes with a covert,
BCH-protected authentication message."""

from .auth import AuthConfig, SecretBundle, Verdict
from .channel import AttackConfig, BerReport, ChannelProfile, TrialConfig, batch_trials, run_trial
from .errors import LcacError
from .ggd import ConstellationProfile, GgdParams
from .layout import DEFAULT_SPEC, BarcodeSpec, ModuleGrid
from .predict import PredictionModel, fit_prediction_model, predict_profile

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "AuthConfig", "BarcodeSpec", "BerReport", "ChannelProfile", "ConstellationProfile",
    "DEFAULT_SPEC", "GgdParams", "LcacError", "ModuleGrid", "PredictionModel", "SecretBundle", "TrialConfig",
    "Verdict", "batch_trials", "fit_prediction_model", "predict_profile", "run_trial",
]
