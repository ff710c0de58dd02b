from __future__ import annotations

from battery_xkf import battery_model
from battery_xkf import estimators
from battery_xkf import harness
from battery_xkf import identification
from battery_xkf import ocv_curve

__all__ = ["battery_model", "estimators", "harness", "identification", "ocv_curve"]

__version__ = "0.1.0"
