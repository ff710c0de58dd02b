from __future__ import annotations

from battery_xkf.estimators.estimators import check_covariance
from battery_xkf.estimators.estimators import ekf_step
from battery_xkf.estimators.estimators import EstimatorState
from battery_xkf.estimators.estimators import KalmanConfig
from battery_xkf.estimators.estimators import lkf_step
from battery_xkf.estimators.estimators import measurement_row
from battery_xkf.estimators.estimators import nlo_step
from battery_xkf.estimators.estimators import ObserverGain
from battery_xkf.estimators.estimators import riccati_step
from battery_xkf.estimators.estimators import ukf_step
from battery_xkf.estimators.estimators import unscented_weights
from battery_xkf.estimators.estimators import xkf_step
from battery_xkf.estimators.filters import EstimatorTrace
from battery_xkf.estimators.filters import FILTER_NAMES
from battery_xkf.estimators.filters import FilterRun
from battery_xkf.estimators.filters import make_filter
from battery_xkf.estimators.filters import run_filter
from battery_xkf.estimators.filters import SocFilter

__all__ = [
    "FILTER_NAMES",
    "EstimatorState",
    "EstimatorTrace",
    "FilterRun",
    "KalmanConfig",
    "ObserverGain",
    "SocFilter",
    "check_covariance",
    "ekf_step",
    "lkf_step",
    "make_filter",
    "measurement_row",
    "nlo_step",
    "riccati_step",
    "run_filter",
    "ukf_step",
    "unscented_weights",
    "xkf_step",
]
