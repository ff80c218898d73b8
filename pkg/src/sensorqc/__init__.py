"""Kalman-filter quality control for hourly weather-station observations."""
from .model import ModelConfig, NoiseEstimate, StateSpaceModel, assemble_model
from .noise import design_highpass, diurnal_highpass, estimate_noise
from .kalman import FilterState, Prediction, ObservationVector, predict, update, filter_observations
from .calibration import CalibrationWindow, init_state
from .detection import Label, Verdict, classify, p_value_two_sided
from .humidity import dew_point_to_rh, rh_to_dew_point
from .metrics import ConfusionCounts, MetricsReport, compute_rates
from .pipeline import calibrate, run_qc
from .config import load_config

__all__ = [
    "ModelConfig", "NoiseEstimate", "StateSpaceModel", "assemble_model",
    "design_highpass", "diurnal_highpass", "estimate_noise",
    "FilterState", "Prediction", "ObservationVector", "predict", "update", "filter_observations",
    "CalibrationWindow", "init_state",
    "Label", "Verdict", "classify", "p_value_two_sided",
    "dew_point_to_rh", "rh_to_dew_point",
    "ConfusionCounts", "MetricsReport", "compute_rates",
    "calibrate", "run_qc", "load_config",
]
__version__ = "0.1.0"
