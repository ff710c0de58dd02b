from __future__ import annotations

from battery_xkf.ocv_curve.ocv_curve import builtin_curve
from battery_xkf.ocv_curve.ocv_curve import DEFAULT_TEMPERATURE_C
from battery_xkf.ocv_curve.ocv_curve import load_ocv_csv
from battery_xkf.ocv_curve.ocv_curve import OcvCurve
from battery_xkf.ocv_curve.ocv_curve import save_ocv_csv
from battery_xkf.ocv_curve.ocv_curve import slope_at
from battery_xkf.ocv_curve.ocv_curve import voltage_at

__all__ = [
    "DEFAULT_TEMPERATURE_C",
    "OcvCurve",
    "builtin_curve",
    "load_ocv_csv",
    "save_ocv_csv",
    "slope_at",
    "voltage_at",
]
