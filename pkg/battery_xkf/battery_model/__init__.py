from __future__ import annotations

from battery_xkf.battery_model.battery_model import BatteryParams
from battery_xkf.battery_model.battery_model import BatteryState
from battery_xkf.battery_model.battery_model import CHARGE_LIMIT_V
from battery_xkf.battery_model.battery_model import coulomb_count
from battery_xkf.battery_model.battery_model import DISCHARGE_CUTOFF_V
from battery_xkf.battery_model.battery_model import discrete_matrices
from battery_xkf.battery_model.battery_model import load_params
from battery_xkf.battery_model.battery_model import NoiseSpec
from battery_xkf.battery_model.battery_model import NOMINAL_CAPACITY_AH
from battery_xkf.battery_model.battery_model import NOMINAL_VOLTAGE_V
from battery_xkf.battery_model.battery_model import propagate
from battery_xkf.battery_model.battery_model import save_params
from battery_xkf.battery_model.battery_model import simulate
from battery_xkf.battery_model.battery_model import SimulationLog
from battery_xkf.battery_model.battery_model import step_euler
from battery_xkf.battery_model.battery_model import system_matrices
from battery_xkf.battery_model.battery_model import terminal_voltage

__all__ = [
    "CHARGE_LIMIT_V",
    "DISCHARGE_CUTOFF_V",
    "NOMINAL_CAPACITY_AH",
    "NOMINAL_VOLTAGE_V",
    "BatteryParams",
    "BatteryState",
    "NoiseSpec",
    "SimulationLog",
    "coulomb_count",
    "discrete_matrices",
    "load_params",
    "propagate",
    "save_params",
    "simulate",
    "step_euler",
    "system_matrices",
    "terminal_voltage",
]
