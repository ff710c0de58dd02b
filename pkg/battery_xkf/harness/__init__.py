from __future__ import annotations

from battery_xkf.harness.cycles import CycleFrame
from battery_xkf.harness.cycles import DriveCycle
from battery_xkf.harness.cycles import DST_NET_CHARGE_PER_PEAK
from battery_xkf.harness.cycles import DST_PERIOD_S
from battery_xkf.harness.cycles import dst_template
from battery_xkf.harness.cycles import generate_dst_like
from battery_xkf.harness.cycles import generate_fuds_like
from battery_xkf.harness.cycles import ingest_cycle_csv
from battery_xkf.harness.cycles import save_cycle_csv
from battery_xkf.harness.experiment import compute_metrics
from battery_xkf.harness.experiment import CONVERGENCE_DWELL
from battery_xkf.harness.experiment import CoulombFrame
from battery_xkf.harness.experiment import divergence_onset
from battery_xkf.harness.experiment import exit_status
from battery_xkf.harness.experiment import ExperimentConfig
from battery_xkf.harness.experiment import ExperimentResult
from battery_xkf.harness.experiment import FilterResult
from battery_xkf.harness.experiment import load_experiment_config
from battery_xkf.harness.experiment import METRICS_COLUMNS
from battery_xkf.harness.experiment import run_experiment
from battery_xkf.harness.experiment import run_temperature_study
from battery_xkf.harness.experiment import RunMetrics
from battery_xkf.harness.experiment import TemperatureStudy
from battery_xkf.harness.experiment import write_metrics_csv

__all__ = [
    "CONVERGENCE_DWELL",
    "DST_NET_CHARGE_PER_PEAK",
    "DST_PERIOD_S",
    "METRICS_COLUMNS",
    "CoulombFrame",
    "CycleFrame",
    "DriveCycle",
    "ExperimentConfig",
    "ExperimentResult",
    "FilterResult",
    "RunMetrics",
    "TemperatureStudy",
    "compute_metrics",
    "divergence_onset",
    "dst_template",
    "exit_status",
    "generate_dst_like",
    "generate_fuds_like",
    "ingest_cycle_csv",
    "load_experiment_config",
    "run_experiment",
    "run_temperature_study",
    "save_cycle_csv",
    "write_metrics_csv",
]
