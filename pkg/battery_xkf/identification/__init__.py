from __future__ import annotations

from battery_xkf.identification.identification import CovarianceMatch
from battery_xkf.identification.identification import fit_parameters
from battery_xkf.identification.identification import FitReport
from battery_xkf.identification.identification import FitSearch
from battery_xkf.identification.identification import match_noise_covariances
from battery_xkf.identification.identification import MIN_MATCHING_SAMPLES
from battery_xkf.identification.identification import model_frame
from battery_xkf.identification.identification import model_voltage
from battery_xkf.identification.identification import ModelFrame
from battery_xkf.identification.identification import ParameterGrid
from battery_xkf.identification.identification import rc_response
from battery_xkf.identification.identification import ResidualFrame
from battery_xkf.identification.identification import rms_error
from battery_xkf.identification.identification import UNIDENTIFIABLE_WARNING

__all__ = [
    "MIN_MATCHING_SAMPLES",
    "UNIDENTIFIABLE_WARNING",
    "CovarianceMatch",
    "FitReport",
    "FitSearch",
    "ModelFrame",
    "ParameterGrid",
    "ResidualFrame",
    "fit_parameters",
    "match_noise_covariances",
    "model_frame",
    "model_voltage",
    "rc_response",
    "rms_error",
]
