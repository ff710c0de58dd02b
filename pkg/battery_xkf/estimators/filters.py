from __future__ import annotations

import abc
import logging
import math
from dataclasses import dataclass
from dataclasses import replace
from typing import ClassVar
from typing import TYPE_CHECKING

import numpy as np

from battery_xkf.battery_model import BatteryState
from battery_xkf.battery_model import propagate
from battery_xkf.battery_model import terminal_voltage
from battery_xkf.errors import InputError
from battery_xkf.errors import NumericalFailure
from battery_xkf.estimators.estimators import ekf_step
from battery_xkf.estimators.estimators import EstimatorState
from battery_xkf.estimators.estimators import KalmanConfig
from battery_xkf.estimators.estimators import lkf_step
from battery_xkf.estimators.estimators import nlo_step
from battery_xkf.estimators.estimators import ObserverGain
from battery_xkf.estimators.estimators import ukf_step
from battery_xkf.estimators.estimators import xkf_step
from battery_xkf.frames import TimeSeriesFrame

if TYPE_CHECKING:
    from battery_xkf._typing import FloatArray
    from battery_xkf.battery_model import BatteryParams
    from battery_xkf.battery_model import SimulationLog
    from battery_xkf.ocv_curve import OcvCurve

_logger = logging.getLogger(__name__)

FILTER_NAMES = ("nlo", "lkf", "xkf", "ekf", "ukf")


class EstimatorTrace(TimeSeriesFrame):
    columns = (
        "t_s",
        "soc_true",
        "soc_bar",
        "soc_hat",
        "v1_hat",
        "v2_hat",
        "p_soc",
        "innovation_v",
    )

    @property
    def soc_error(self) -> FloatArray:
        return self.column("soc_hat") - self.column("soc_true")


class SocFilter(abc.ABC):
    """One estimator instance; owns its state and is driven sample by sample."""

    name: ClassVar[str]

    def __init__(self, params: BatteryParams, curve: OcvCurve, dt_s: float) -> None:
        self.params = params
        self.curve = curve
        self.dt_s = dt_s
        self._state: EstimatorState

    @property
    def state(self) -> EstimatorState:
        return self._state

    @abc.abstractmethod
    def step(self, current_a: float, v_measured: float) -> EstimatorState:
        ...


class NloFilter(SocFilter):
    name = "nlo"

    def __init__(
        self,
        params: BatteryParams,
        curve: OcvCurve,
        dt_s: float,
        initial: BatteryState,
        gain: ObserverGain,
    ) -> None:
        super().__init__(params, curve, dt_s)
        self.gain = gain
        self.substeps = gain.substeps_for(curve, dt_s)
        self._state = EstimatorState(x_hat=initial, x_bar=initial)

    def step(self, current_a: float, v_measured: float) -> EstimatorState:
        x_bar = self._state.x_hat
        innovation = v_measured - terminal_voltage(self.params, self.curve, x_bar, current_a)
        x_next = nlo_step(
            self.params,
            self.curve,
            self.gain,
            x_bar,
            current_a,
            v_measured,
            self.dt_s,
            substeps=self.substeps,
        )
        if not np.all(np.isfinite(x_next.as_array())):
            raise NumericalFailure("observer state is not finite", step=self._state.step)
        self._state = EstimatorState(
            x_hat=x_next, x_bar=x_next, step=self._state.step + 1, innovation=innovation
        )
        return self._state


class LkfFilter(SocFilter):
    """Linearized about the open-loop model trajectory from the initial estimate."""

    name = "lkf"

    def __init__(
        self,
        params: BatteryParams,
        curve: OcvCurve,
        dt_s: float,
        initial: BatteryState,
        cfg: KalmanConfig,
    ) -> None:
        super().__init__(params, curve, dt_s)
        self.cfg = cfg
        self._state = EstimatorState(x_hat=initial, p=cfg.p0.copy(), x_bar=initial)

    def step(self, current_a: float, v_measured: float) -> EstimatorState:
        nominal = self._state.x_bar
        assert nominal is not None
        updated = lkf_step(
            self.params,
            self.curve,
            self.cfg,
            self._state,
            nominal,
            current_a,
            v_measured,
            self.dt_s,
        )
        nxt = BatteryState(
            *propagate(self.params, nominal.v1, nominal.v2, nominal.soc, current_a, self.dt_s)
        )
        self._state = replace(updated, x_bar=nxt)
        return self._state


class XkfFilter(SocFilter):
    name = "xkf"

    def __init__(
        self,
        params: BatteryParams,
        curve: OcvCurve,
        dt_s: float,
        initial: BatteryState,
        gain: ObserverGain,
        cfg: KalmanConfig,
    ) -> None:
        super().__init__(params, curve, dt_s)
        self.gain = gain
        self.cfg = cfg
        self.substeps = gain.substeps_for(curve, dt_s)
        self._state = EstimatorState(x_hat=initial, p=cfg.p0.copy(), x_bar=initial)

    def step(self, current_a: float, v_measured: float) -> EstimatorState:
        self._state = xkf_step(
            self.params,
            self.curve,
            self.gain,
            self.cfg,
            self._state,
            current_a,
            v_measured,
            self.dt_s,
            substeps=self.substeps,
        )
        return self._state


class EkfFilter(SocFilter):
    name = "ekf"

    def __init__(
        self,
        params: BatteryParams,
        curve: OcvCurve,
        dt_s: float,
        initial: BatteryState,
        cfg: KalmanConfig,
    ) -> None:
        super().__init__(params, curve, dt_s)
        self.cfg = cfg
        self._state = EstimatorState(x_hat=initial, p=cfg.p0.copy())

    def step(self, current_a: float, v_measured: float) -> EstimatorState:
        self._state = ekf_step(
            self.params, self.curve, self.cfg, self._state, current_a, v_measured, self.dt_s
        )
        return self._state


class UkfFilter(SocFilter):
    name = "ukf"

    def __init__(
        self,
        params: BatteryParams,
        curve: OcvCurve,
        dt_s: float,
        initial: BatteryState,
        cfg: KalmanConfig,
        *,
        jitter: bool = False,
    ) -> None:
        super().__init__(params, curve, dt_s)
        self.cfg = cfg
        self.jitter = jitter
        self._state = EstimatorState(x_hat=initial, p=cfg.p0.copy())

    def step(self, current_a: float, v_measured: float) -> EstimatorState:
        self._state = ukf_step(
            self.params,
            self.curve,
            self.cfg,
            self._state,
            current_a,
            v_measured,
            self.dt_s,
            jitter=self.jitter,
        )
        return self._state


def make_filter(
    name: str,
    params: BatteryParams,
    curve: OcvCurve,
    dt_s: float,
    initial: BatteryState,
    *,
    gain: ObserverGain | None = None,
    cfg: KalmanConfig | None = None,
    jitter: bool = False,
) -> SocFilter:
    gain = ObserverGain() if gain is None else gain
    cfg = KalmanConfig.default() if cfg is None else cfg
    if name in ("nlo", "xkf") and gain.k3 == 0:
        _logger.warning("%s: k3 = 0 removes the soc correction channel", name)
    if name == "nlo":
        return NloFilter(params, curve, dt_s, initial, gain)
    if name == "lkf":
        return LkfFilter(params, curve, dt_s, initial, cfg)
    if name == "xkf":
        return XkfFilter(params, curve, dt_s, initial, gain, cfg)
    if name == "ekf":
        return EkfFilter(params, curve, dt_s, initial, cfg)
    if name == "ukf":
        return UkfFilter(params, curve, dt_s, initial, cfg, jitter=jitter)
    raise InputError(f"Unknown filter {name!r}, expected one of {FILTER_NAMES}")


@dataclass(frozen=True, eq=False)
class FilterRun:
    name: str
    trace: EstimatorTrace
    # per processed sample: measurement row and the covariance it was predicted with
    h_rows: FloatArray
    p_priors: FloatArray
    failed_at: int | None = None
    error: str | None = None

    @property
    def innovations(self) -> FloatArray:
        return self.trace.column("innovation_v")


def run_filter(
    filt: SocFilter,
    log: SimulationLog,
    *,
    currents: FloatArray | None = None,
) -> FilterRun:
    """Drive ``filt`` over every sample of ``log``.

    Row k of the trace holds the estimate at t_k before sample k is processed and the
    innovation of sample k. A numerical failure ends the run early and is reported on
    the returned record.
    """
    times = log.times
    voltages = log.voltages
    soc_true = log.soc_true
    currents = log.currents if currents is None else np.asarray(currents, dtype=np.float64)
    n = len(times)
    rows = np.full((n, 8), math.nan)
    h_rows = np.full((n, 3), math.nan)
    p_priors = np.full((n, 3, 3), math.nan)
    failed_at: int | None = None
    error: str | None = None
    stop = n
    for k in range(n):
        before = filt.state
        rows[k, :6] = (
            times[k],
            soc_true[k],
            math.nan if before.x_bar is None else before.x_bar.soc,
            before.x_hat.soc,
            before.x_hat.v1,
            before.x_hat.v2,
        )
        if before.p is not None:
            rows[k, 6] = before.p[2, 2]
        try:
            after = filt.step(float(currents[k]), float(voltages[k]))
        except NumericalFailure as exc:
            failed_at = exc.step
            error = str(exc)
            stop = k
            _logger.warning("%s failed: %s", filt.name, exc)
            break
        rows[k, 7] = after.innovation
        if after.h_row is not None:
            h_rows[k] = after.h_row
        if after.p_prior is not None:
            p_priors[k] = after.p_prior
    trace = EstimatorTrace.from_columns(
        **{name: rows[:stop, i] for i, name in enumerate(EstimatorTrace.columns)}
    )
    return FilterRun(filt.name, trace, h_rows[:stop], p_priors[:stop], failed_at, error)
