from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal
from typing import TYPE_CHECKING

import numpy as np
from scipy.integrate import cumulative_trapezoid

from battery_xkf.errors import InputError
from battery_xkf.frames import TimeSeriesFrame
from battery_xkf.keyvalue import parse_float
from battery_xkf.keyvalue import read_key_values
from battery_xkf.keyvalue import write_key_values
from battery_xkf.ocv_curve import voltage_at

if TYPE_CHECKING:
    from battery_xkf._typing import FloatArray
    from battery_xkf.harness.cycles import DriveCycle
    from battery_xkf.ocv_curve import OcvCurve

_logger = logging.getLogger(__name__)

Discretization = Literal["euler", "exact"]
Quadrature = Literal["trapezoid", "forward"]

# LiFePO4 cell used for the reference data
NOMINAL_CAPACITY_AH = 2.23
NOMINAL_VOLTAGE_V = 3.3
CHARGE_LIMIT_V = 3.6
DISCHARGE_CUTOFF_V = 2.0

_PARAM_KEYS = ("r_ohm", "r1", "c1", "r2", "c2", "capacity_ah")


@dataclass(frozen=True)
class BatteryParams:
    r_ohm: float
    r1: float
    c1: float
    r2: float
    c2: float
    capacity_as: float

    def __post_init__(self) -> None:
        for name in ("r_ohm", "r1", "c1", "r2", "c2", "capacity_as"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InputError(f"Expected {name} > 0, got {value}")

    @classmethod
    def reference_cell(cls) -> BatteryParams:
        """Parameters identified for the reference cell at 20 °C."""
        return cls(
            r_ohm=0.18,
            r1=0.035,
            c1=1e6,
            r2=0.035,
            c2=1e6,
            capacity_as=NOMINAL_CAPACITY_AH * 3600.0,
        )

    @property
    def capacity_ah(self) -> float:
        return self.capacity_as / 3600.0

    @property
    def tau1(self) -> float:
        return self.r1 * self.c1

    @property
    def tau2(self) -> float:
        return self.r2 * self.c2


@dataclass(frozen=True)
class BatteryState:
    v1: float
    v2: float
    soc: float

    def as_array(self) -> FloatArray:
        return np.array([self.v1, self.v2, self.soc], dtype=np.float64)

    @classmethod
    def from_array(cls, values: FloatArray) -> BatteryState:
        return cls(float(values[0]), float(values[1]), float(values[2]))


@dataclass(frozen=True)
class NoiseSpec:
    process_std: tuple[float, float, float] = (0.0, 0.0, 0.0)
    measurement_std: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.process_std) != 3:
            raise InputError(
                f"Expected 3 process standard deviations, got {len(self.process_std)}"
            )
        for value in (*self.process_std, self.measurement_std):
            if not (math.isfinite(value) and value >= 0):
                raise InputError(f"Expected standard deviations >= 0, got {value}")

    @classmethod
    def uniform(cls, process_std: float, measurement_std: float, seed: int = 0) -> NoiseSpec:
        return cls((process_std, process_std, process_std), measurement_std, seed)


class SimulationLog(TimeSeriesFrame):
    """Plant log; logs read back from CSV infer the sample period from their timestamps."""

    columns = ("t_s", "current_a", "voltage_v", "soc_true", "v1_true", "v2_true")
    optional = ("soc_true", "v1_true", "v2_true")
    _sample_period_s: float | None = None

    def with_sample_period(self, dt_s: float) -> SimulationLog:
        _validate_dt(dt_s)
        log = SimulationLog(self.dataframe)
        log._sample_period_s = dt_s
        return log

    @property
    def times(self) -> FloatArray:
        return self.column("t_s")

    @property
    def currents(self) -> FloatArray:
        return self.column("current_a")

    @property
    def voltages(self) -> FloatArray:
        return self.column("voltage_v")

    @property
    def soc_true(self) -> FloatArray:
        return self.column("soc_true")

    @property
    def dt_s(self) -> float:
        if self._sample_period_s is not None:
            return self._sample_period_s
        times = self.times
        if len(times) < 2:
            raise InputError("Expected at least 2 samples to infer the sample period")
        return float(times[1] - times[0])

    def true_state(self, index: int) -> BatteryState:
        return BatteryState(
            float(self.column("v1_true")[index]),
            float(self.column("v2_true")[index]),
            float(self.column("soc_true")[index]),
        )


def load_params(path: str | Path) -> BatteryParams:
    values = read_key_values(path)
    missing = [key for key in _PARAM_KEYS if key not in values]
    if missing:
        raise InputError(f"{path}: missing parameter(s) {missing}")
    unknown = sorted(set(values) - set(_PARAM_KEYS))
    if unknown:
        raise InputError(f"{path}: unknown parameter(s) {unknown}")
    return BatteryParams(
        r_ohm=parse_float(values, "r_ohm"),
        r1=parse_float(values, "r1"),
        c1=parse_float(values, "c1"),
        r2=parse_float(values, "r2"),
        c2=parse_float(values, "c2"),
        capacity_as=parse_float(values, "capacity_ah") * 3600.0,
    )


def save_params(params: BatteryParams, path: str | Path) -> None:
    write_key_values(
        {
            "r_ohm": params.r_ohm,
            "r1": params.r1,
            "c1": params.c1,
            "r2": params.r2,
            "c2": params.c2,
            "capacity_ah": params.capacity_ah,
        },
        path,
    )


def system_matrices(params: BatteryParams) -> tuple[FloatArray, FloatArray]:
    a = np.diag([-1.0 / params.tau1, -1.0 / params.tau2, 0.0])
    b = np.array([1.0 / params.c1, 1.0 / params.c2, -1.0 / params.capacity_as])
    return a, b


def discrete_matrices(
    params: BatteryParams, dt_s: float, method: Discretization = "euler"
) -> tuple[FloatArray, FloatArray]:
    _validate_dt(dt_s)
    if method == "euler":
        a, b = system_matrices(params)
        return np.eye(3) + dt_s * a, dt_s * b
    if method == "exact":
        decay1 = math.exp(-dt_s / params.tau1)
        decay2 = math.exp(-dt_s / params.tau2)
        f = np.diag([decay1, decay2, 1.0])
        g = np.array(
            [
                params.r1 * (1.0 - decay1),
                params.r2 * (1.0 - decay2),
                -dt_s / params.capacity_as,
            ]
        )
        return f, g
    raise InputError(f"Expected discretization 'euler' or 'exact', got {method!r}")


def propagate(
    params: BatteryParams,
    v1: float,
    v2: float,
    soc: float,
    current_a: float,
    dt_s: float,
    method: Discretization = "euler",
) -> tuple[float, float, float]:
    """One unclamped model step; shared by the plant and every estimator."""
    soc_next = soc - dt_s * current_a / params.capacity_as
    if method == "euler":
        return (
            v1 + dt_s * (current_a / params.c1 - v1 / params.tau1),
            v2 + dt_s * (current_a / params.c2 - v2 / params.tau2),
            soc_next,
        )
    if method != "exact":
        raise InputError(f"Expected discretization 'euler' or 'exact', got {method!r}")
    decay1 = math.exp(-dt_s / params.tau1)
    decay2 = math.exp(-dt_s / params.tau2)
    return (
        decay1 * v1 + params.r1 * (1.0 - decay1) * current_a,
        decay2 * v2 + params.r2 * (1.0 - decay2) * current_a,
        soc_next,
    )


def terminal_voltage(
    params: BatteryParams, curve: OcvCurve, state: BatteryState, current_a: float
) -> float:
    # positive current discharges
    return voltage_at(curve, state.soc) - state.v1 - state.v2 - params.r_ohm * current_a


def step_euler(
    params: BatteryParams,
    state: BatteryState,
    current_a: float,
    dt_s: float,
    *,
    method: Discretization = "euler",
    clamp: bool = True,
) -> BatteryState:
    _validate_dt(dt_s)
    v1, v2, soc = propagate(params, state.v1, state.v2, state.soc, current_a, dt_s, method)
    if clamp:
        soc = min(max(soc, 0.0), 1.0)
    return BatteryState(v1, v2, soc)


def coulomb_count(
    initial_soc: float,
    times: FloatArray,
    currents: FloatArray,
    capacity_as: float,
    *,
    method: Quadrature = "trapezoid",
) -> FloatArray:
    """SoC reference from integrated current; never clamped."""
    times = np.asarray(times, dtype=np.float64)
    currents = np.asarray(currents, dtype=np.float64)
    if times.shape != currents.shape or times.ndim != 1:
        raise InputError(
            f"Expected matching 1-D times and currents, got {times.shape} and {currents.shape}"
        )
    if len(times) == 0:
        raise InputError("Expected at least one sample")
    steps = np.diff(times)
    if np.any(steps <= 0):
        row = int(np.argmax(steps <= 0)) + 1
        raise InputError(f"Expected strictly increasing timestamps, violated at sample {row}")
    if capacity_as <= 0:
        raise InputError(f"Expected capacity_as > 0, got {capacity_as}")
    if method == "trapezoid":
        charge = cumulative_trapezoid(currents, times, initial=0.0)
    elif method == "forward":
        charge = np.concatenate(([0.0], np.cumsum(currents[:-1] * steps)))
    else:
        raise InputError(f"Expected quadrature 'trapezoid' or 'forward', got {method!r}")
    return initial_soc - charge / capacity_as


def simulate(
    params: BatteryParams,
    curve: OcvCurve,
    cycle: DriveCycle,
    initial: BatteryState,
    noise: NoiseSpec,
    *,
    method: Discretization = "euler",
    cutoff_v: float | None = None,
) -> SimulationLog:
    dt_s = cycle.dt_s
    _validate_dt(dt_s)
    currents = cycle.currents
    n = len(currents)
    if n == 0:
        raise InputError(f"Drive cycle {cycle.name!r} is empty")
    rng = np.random.default_rng(noise.seed)
    process = rng.standard_normal((n, 3)) * np.asarray(noise.process_std)
    measurement = rng.standard_normal(n) * noise.measurement_std

    rows = np.empty((n, 6), dtype=np.float64)
    state = initial
    stop = n
    for k in range(n):
        current = float(currents[k])
        v_true = terminal_voltage(params, curve, state, current)
        if cutoff_v is not None and v_true < cutoff_v:
            _logger.info("cut-off %.3f V reached at t=%.1f s", cutoff_v, k * dt_s)
            stop = k
            break
        rows[k] = (k * dt_s, current, v_true + measurement[k], state.soc, state.v1, state.v2)
        nxt = step_euler(params, state, current, dt_s, method=method)
        state = BatteryState(
            nxt.v1 + process[k, 0],
            nxt.v2 + process[k, 1],
            min(max(nxt.soc + process[k, 2], 0.0), 1.0),
        )
    rows = rows[:stop]
    return SimulationLog.from_columns(
        t_s=rows[:, 0],
        current_a=rows[:, 1],
        voltage_v=rows[:, 2],
        soc_true=rows[:, 3],
        v1_true=rows[:, 4],
        v2_true=rows[:, 5],
    ).with_sample_period(dt_s)


def _validate_dt(dt_s: float) -> None:
    if not (math.isfinite(dt_s) and dt_s > 0):
        raise InputError(f"Expected dt_s > 0, got {dt_s}")
