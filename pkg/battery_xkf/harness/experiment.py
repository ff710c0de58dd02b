from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd

from battery_xkf.battery_model import BatteryParams
from battery_xkf.battery_model import BatteryState
from battery_xkf.battery_model import coulomb_count
from battery_xkf.battery_model import load_params
from battery_xkf.battery_model import NoiseSpec
from battery_xkf.battery_model import simulate
from battery_xkf.errors import InputError
from battery_xkf.estimators import FILTER_NAMES
from battery_xkf.estimators import KalmanConfig
from battery_xkf.estimators import make_filter
from battery_xkf.estimators import ObserverGain
from battery_xkf.estimators import run_filter
from battery_xkf.frames import STREAM_HEADER
from battery_xkf.frames import stream_checksum
from battery_xkf.frames import TimeSeriesFrame
from battery_xkf.harness.cycles import generate_dst_like
from battery_xkf.harness.cycles import generate_fuds_like
from battery_xkf.harness.cycles import ingest_cycle_csv
from battery_xkf.keyvalue import format_value
from battery_xkf.keyvalue import read_key_values
from battery_xkf.keyvalue import write_key_values
from battery_xkf.ocv_curve import builtin_curve
from battery_xkf.ocv_curve import load_ocv_csv

if TYPE_CHECKING:
    from collections.abc import Callable
    from collections.abc import Iterable
    from collections.abc import Mapping

    from battery_xkf._typing import FloatArray
    from battery_xkf.battery_model import SimulationLog
    from battery_xkf.estimators import EstimatorTrace
    from battery_xkf.estimators import FilterRun
    from battery_xkf.harness.cycles import DriveCycle
    from battery_xkf.ocv_curve import OcvCurve

_logger = logging.getLogger(__name__)

CONVERGENCE_DWELL = 60
METRICS_COLUMNS = (
    "filter",
    "soc_rmse",
    "terminal_error",
    "convergence_time_s",
    "max_overshoot",
    "saturation_count",
    "failed_at",
)
# absolute margin on top of twice the matched error before divergence is declared
_ONSET_MARGIN = 1e-3


class CoulombFrame(TimeSeriesFrame):
    columns = ("t_s", "soc_cc", "soc_true")


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


def _parse_optional(value: str) -> str | None:
    return value or None


def _parse_triple(value: str) -> tuple[float, float, float]:
    items = tuple(float(item) for item in value.split(","))
    if len(items) == 1:
        return (items[0], items[0], items[0])
    if len(items) != 3:
        raise ValueError(value)
    return (items[0], items[1], items[2])


def _parse_names(value: str) -> tuple[str, ...]:
    return tuple(item.strip() for item in value.split(",") if item.strip())


_PARSERS: dict[str, Callable[[str], Any]] = {
    "params_file": _parse_optional,
    "ocv_file": _parse_optional,
    "temperature_c": float,
    "cycle_file": _parse_optional,
    "cycle": str,
    "duration_s": float,
    "peak_a": float,
    "dt_s": float,
    "cycle_seed": int,
    "filters": _parse_names,
    "soc_true0": float,
    "soc_est0": float,
    "k1": float,
    "k2": float,
    "k3": float,
    "kf_process_std": _parse_triple,
    "kf_measurement_std": float,
    "p0_diag": _parse_triple,
    "riccati": str,
    "ukf_jitter": _parse_bool,
    "process_std": _parse_triple,
    "measurement_std": float,
    "seed": int,
    "threshold": float,
    "current_bias_a": float,
    "output_dir": _parse_optional,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One comparison run: plant, drive cycle, filter bank and output layout."""

    params_file: str | None = None
    ocv_file: str | None = None
    temperature_c: float = 20.0
    # a cycle file wins over the generator fields below
    cycle_file: str | None = None
    cycle: str = "dst"
    duration_s: float = 3600.0
    peak_a: float = 2.23
    dt_s: float = 1.0
    cycle_seed: int = 0
    filters: tuple[str, ...] = FILTER_NAMES
    soc_true0: float = 1.0
    soc_est0: float = 0.6
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 2.0
    kf_process_std: tuple[float, float, float] = (1e-5, 1e-5, 0.01)
    kf_measurement_std: float = 0.04
    p0_diag: tuple[float, float, float] = (1e-6, 1e-6, 0.25)
    riccati: str = "split"
    ukf_jitter: bool = False
    # plant noise
    process_std: tuple[float, float, float] = (0.0, 0.0, 0.0)
    measurement_std: float = 0.001
    seed: int = 0
    threshold: float = 0.02
    current_bias_a: float = 0.0
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if not 0 < self.threshold < 1:
            raise InputError(f"Expected threshold in (0, 1), got {self.threshold}")
        if not self.filters:
            raise InputError("Expected at least one filter")
        unknown = [name for name in self.filters if name not in FILTER_NAMES]
        if unknown:
            raise InputError(f"Unknown filter(s) {unknown}, expected one of {FILTER_NAMES}")
        if len(set(self.filters)) != len(self.filters):
            raise InputError(f"Expected distinct filters, got {self.filters}")
        if self.cycle not in ("dst", "fuds"):
            raise InputError(f"Expected cycle 'dst' or 'fuds', got {self.cycle!r}")
        for name in ("soc_true0", "soc_est0"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise InputError(f"Expected {name} in [0, 1], got {value}")
        if not math.isfinite(self.current_bias_a):
            raise InputError(f"Expected a finite current bias, got {self.current_bias_a}")

    def resolved(self) -> dict[str, object]:
        values = asdict(self)
        del values["output_dir"]
        return values

    def gain(self) -> ObserverGain:
        return ObserverGain(self.k1, self.k2, self.k3)

    def kalman(self) -> KalmanConfig:
        if self.riccati not in ("split", "euler"):
            raise InputError(f"Expected riccati 'split' or 'euler', got {self.riccati!r}")
        return KalmanConfig.from_std(
            self.kf_process_std,
            self.kf_measurement_std,
            p0_diag=self.p0_diag,
            riccati="euler" if self.riccati == "euler" else "split",
        )

    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.process_std, self.measurement_std, self.seed)

    def load_params(self) -> BatteryParams:
        if self.params_file is None:
            return BatteryParams.reference_cell()
        return load_params(self.params_file)

    def load_curve(self) -> OcvCurve:
        if self.ocv_file is None:
            return builtin_curve(self.temperature_c)
        return load_ocv_csv(self.ocv_file)

    def load_cycle(self) -> DriveCycle:
        if self.cycle_file is not None:
            return ingest_cycle_csv(self.cycle_file)
        if self.cycle == "fuds":
            return generate_fuds_like(
                self.duration_s, self.peak_a, self.dt_s, seed=self.cycle_seed
            )
        return generate_dst_like(self.duration_s, self.peak_a, self.dt_s)


def load_experiment_config(path: str | Path, **overrides: Any) -> ExperimentConfig:
    values = read_key_values(path)
    unknown = sorted(set(values) - set(_PARSERS))
    if unknown:
        raise InputError(f"{path}: unknown config key(s) {unknown}")
    kwargs: dict[str, Any] = {}
    for key, raw in values.items():
        try:
            kwargs[key] = _PARSERS[key](raw)
        except ValueError:
            raise InputError(f"{path}: invalid value for {key!r}: {raw!r}") from None
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


@dataclass(frozen=True)
class RunMetrics:
    soc_rmse: float
    terminal_error: float
    # None when the error never stays below the threshold for the dwell
    convergence_time_s: float | None
    max_overshoot: float
    saturation_count: int


def _first_dwell(below: np.ndarray[Any, Any], dwell: int) -> int | None:
    if len(below) < dwell:
        return None
    run = np.convolve(below.astype(np.int64), np.ones(dwell, dtype=np.int64), mode="valid")
    hits = np.flatnonzero(run == dwell)
    return int(hits[0]) if len(hits) else None


def compute_metrics(
    trace: EstimatorTrace, threshold: float, dwell: int = CONVERGENCE_DWELL
) -> RunMetrics:
    if len(trace) == 0:
        raise InputError("Expected a non-empty trace")
    times = trace.column("t_s")
    soc_hat = trace.column("soc_hat")
    error = trace.soc_error
    if not np.all(np.isfinite(error)):
        raise InputError("Trace has no finite true soc to score against")
    start = times[0]
    index = _first_dwell(np.abs(error) < threshold, dwell)
    # overshoot is measured on the side opposite to the initial error
    sign = np.sign(error[0])
    overshoot = float(max(0.0, (-sign * error).max())) if sign != 0 else 0.0
    return RunMetrics(
        soc_rmse=float(np.sqrt(np.mean(error**2))),
        terminal_error=float(abs(error[-1])),
        convergence_time_s=None if index is None else float(times[index] - start),
        max_overshoot=overshoot,
        saturation_count=int(np.count_nonzero((soc_hat < 0.0) | (soc_hat > 1.0))),
    )


@dataclass(frozen=True, eq=False)
class FilterResult:
    run: FilterRun
    metrics: RunMetrics | None

    @property
    def name(self) -> str:
        return self.run.name

    @property
    def failed_at(self) -> int | None:
        return self.run.failed_at


def _metrics_row(label: str, result: FilterResult) -> dict[str, object]:
    metrics = result.metrics
    row: dict[str, object] = {"filter": label, "failed_at": result.failed_at}
    if metrics is not None:
        row.update(asdict(metrics))
    return row


def write_metrics_csv(rows: Iterable[tuple[str, FilterResult]], path: str | Path) -> None:
    dataframe = pd.DataFrame(
        [_metrics_row(label, result) for label, result in rows],
        columns=list(METRICS_COLUMNS),
    )
    dataframe = dataframe.astype(
        {"saturation_count": "Int64", "failed_at": "Int64", "convergence_time_s": "Float64"}
    )
    with Path(path).open("w", encoding="utf-8", newline="") as fd:
        dataframe.to_csv(fd, index=False, lineterminator="\n")


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    log: SimulationLog
    coulomb: CoulombFrame
    filters: dict[str, FilterResult]
    checksum: str

    def __getitem__(self, name: str) -> FilterResult:
        return self.filters[name]

    @property
    def failed(self) -> list[str]:
        return [name for name, result in self.filters.items() if result.failed_at is not None]


def exit_status(results: Mapping[str, FilterResult]) -> int:
    failed = sum(result.failed_at is not None for result in results.values())
    if failed == 0:
        return 0
    return 2 if failed == len(results) else 3


def _initial_states(cfg: ExperimentConfig) -> tuple[BatteryState, BatteryState]:
    return BatteryState(0.0, 0.0, cfg.soc_true0), BatteryState(0.0, 0.0, cfg.soc_est0)


def _score(run: FilterRun, threshold: float) -> RunMetrics | None:
    if run.failed_at is not None or len(run.trace) == 0:
        return None
    if not np.all(np.isfinite(run.trace.column("soc_true"))):
        return None
    metrics = compute_metrics(run.trace, threshold)
    if metrics.convergence_time_s is None:
        _logger.warning(
            "%s did not converge within %.3g (terminal error %.4f)",
            run.name,
            threshold,
            metrics.terminal_error,
        )
    return metrics


def _run_one(
    name: str,
    cfg: ExperimentConfig,
    params: BatteryParams,
    curve: OcvCurve,
    log: SimulationLog,
    currents: FloatArray,
    initial: BatteryState,
) -> FilterResult:
    filt = make_filter(
        name,
        params,
        curve,
        log.dt_s,
        initial,
        gain=cfg.gain(),
        cfg=cfg.kalman(),
        jitter=cfg.ukf_jitter,
    )
    run = run_filter(filt, log, currents=currents)
    _logger.info("%s finished over %d samples", name, len(run.trace))
    return FilterResult(run, _score(run, cfg.threshold))


def _write_trace(trace: EstimatorTrace, checksum: str, path: Path) -> None:
    trace.to_csv(path, header_line=f"{STREAM_HEADER}{checksum}")


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Simulate the plant once and run every selected filter over that one log.

    Filters see the measured voltage and the current plus ``current_bias_a``; the
    plant itself is driven by the unbiased current.
    """
    params = cfg.load_params()
    curve = cfg.load_curve()
    cycle = cfg.load_cycle()
    truth, estimate = _initial_states(cfg)
    log = simulate(params, curve, cycle, truth, cfg.noise())
    _logger.info("simulated %d samples of %r", len(log), cycle.name)
    currents = log.currents + cfg.current_bias_a
    checksum = stream_checksum(currents, log.voltages)
    coulomb = CoulombFrame.from_columns(
        t_s=log.times,
        soc_cc=coulomb_count(cfg.soc_true0, log.times, currents, params.capacity_as),
        soc_true=log.soc_true,
    )

    with ThreadPoolExecutor(max_workers=len(cfg.filters)) as pool:
        futures = {
            name: pool.submit(_run_one, name, cfg, params, curve, log, currents, estimate)
            for name in cfg.filters
        }
        results = {name: future.result() for name, future in futures.items()}

    if cfg.output_dir is not None:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_key_values(cfg.resolved(), out / "config.txt")
        log.to_csv(out / "truth.csv")
        coulomb.to_csv(out / "coulomb.csv")
        for name, result in results.items():
            _write_trace(result.run.trace, checksum, out / f"{name}.trace.csv")
        write_metrics_csv(results.items(), out / "metrics.csv")
        _logger.info("wrote experiment output to %s", out)
    return ExperimentResult(log, coulomb, results, checksum)


@dataclass(frozen=True, eq=False)
class TemperatureStudy:
    matched: FilterResult
    mismatched: FilterResult
    # true soc where the mismatched run first departs from the matched one
    divergence_onset_soc: float | None
    log: SimulationLog
    checksum: str


def divergence_onset(
    soc_true: FloatArray,
    matched_error: FloatArray,
    mismatched_error: FloatArray,
    dwell: int = CONVERGENCE_DWELL,
) -> float | None:
    n = min(len(soc_true), len(matched_error), len(mismatched_error))
    exceeds = np.abs(mismatched_error[:n]) > 2.0 * np.abs(matched_error[:n]) + _ONSET_MARGIN
    index = _first_dwell(exceeds, dwell)
    return None if index is None else float(soc_true[index])


def run_temperature_study(
    cfg: ExperimentConfig,
    curve_true: OcvCurve,
    curve_filter: OcvCurve,
    *,
    filter_name: str = "xkf",
) -> TemperatureStudy:
    """Run one filter twice over the same log: with the plant's curve and with another."""
    if filter_name not in FILTER_NAMES:
        raise InputError(f"Unknown filter {filter_name!r}, expected one of {FILTER_NAMES}")
    params = cfg.load_params()
    cycle = cfg.load_cycle()
    truth, estimate = _initial_states(cfg)
    log = simulate(params, curve_true, cycle, truth, cfg.noise())
    currents = log.currents + cfg.current_bias_a
    checksum = stream_checksum(currents, log.voltages)
    with ThreadPoolExecutor(max_workers=2) as pool:
        matched_future = pool.submit(
            _run_one, filter_name, cfg, params, curve_true, log, currents, estimate
        )
        mismatched_future = pool.submit(
            _run_one, filter_name, cfg, params, curve_filter, log, currents, estimate
        )
        matched = matched_future.result()
        mismatched = mismatched_future.result()
    onset = divergence_onset(
        log.soc_true, matched.run.trace.soc_error, mismatched.run.trace.soc_error
    )
    _logger.info("divergence onset soc: %s", format_value(onset) or "none")
    if cfg.output_dir is not None:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_key_values(cfg.resolved(), out / "config.txt")
        log.to_csv(out / "truth.csv")
        _write_trace(matched.run.trace, checksum, out / "matched.trace.csv")
        _write_trace(mismatched.run.trace, checksum, out / "mismatched.trace.csv")
        write_metrics_csv(
            [("matched", matched), ("mismatched", mismatched)], out / "metrics.csv"
        )
        write_key_values(
            {
                "filter": filter_name,
                "truth_temperature_c": curve_true.temperature_c,
                "filter_temperature_c": curve_filter.temperature_c,
                "divergence_onset_soc": onset,
            },
            out / "onset.txt",
        )
    return TemperatureStudy(matched, mismatched, onset, log, checksum)
