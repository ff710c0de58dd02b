from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import lfilter

from battery_xkf.battery_model import BatteryParams
from battery_xkf.battery_model import coulomb_count
from battery_xkf.battery_model import NOMINAL_CAPACITY_AH
from battery_xkf.errors import InputError
from battery_xkf.frames import TimeSeriesFrame
from battery_xkf.keyvalue import write_key_values

if TYPE_CHECKING:
    from collections.abc import Sequence

    from battery_xkf._typing import FloatArray
    from battery_xkf.battery_model import SimulationLog
    from battery_xkf.ocv_curve import OcvCurve

_logger = logging.getLogger(__name__)

UNIDENTIFIABLE_WARNING = "constant current: RC pairs are unidentifiable"
MIN_MATCHING_SAMPLES = 100


class ResidualFrame(TimeSeriesFrame):
    columns = ("t_s", "residual_v")


class ModelFrame(TimeSeriesFrame):
    columns = ("t_s", "voltage_v", "model_v", "soc_cc", "ocv_v")


def rms_error(
    measured: Sequence[float] | FloatArray, estimated: Sequence[float] | FloatArray
) -> float:
    measured = np.asarray(measured, dtype=np.float64)
    estimated = np.asarray(estimated, dtype=np.float64)
    if measured.shape != estimated.shape:
        raise InputError(
            f"Expected series of equal length, got {measured.shape} and {estimated.shape}"
        )
    if measured.size == 0:
        raise InputError("Expected at least one sample")
    return float(np.sqrt(np.mean((measured - estimated) ** 2)))


@dataclass(frozen=True)
class ParameterGrid:
    low: float
    high: float
    points: int = 11
    log: bool = False

    def __post_init__(self) -> None:
        if self.points < 1:
            raise InputError(f"Expected at least one grid point, got {self.points}")
        if not (0 < self.low <= self.high and math.isfinite(self.high)):
            raise InputError(f"Expected 0 < low <= high, got [{self.low}, {self.high}]")

    @property
    def step(self) -> float:
        """Spacing of the coarse grid (log10 spacing for log grids)."""
        if self.points == 1:
            return 0.0
        if self.log:
            return (math.log10(self.high) - math.log10(self.low)) / (self.points - 1)
        return (self.high - self.low) / (self.points - 1)

    def values(self) -> FloatArray:
        if self.log:
            return np.logspace(math.log10(self.low), math.log10(self.high), self.points)
        return np.linspace(self.low, self.high, self.points)

    def around(self, center: float, step: float) -> FloatArray:
        offsets = np.arange(self.points) - (self.points - 1) // 2
        if self.log:
            values = 10.0 ** (math.log10(center) + step * offsets)
        else:
            values = center + step * offsets
        # the incumbent must stay on the grid exactly
        values[(self.points - 1) // 2] = center
        return np.unique(np.clip(values, self.low, self.high))


@dataclass(frozen=True)
class FitSearch:
    r_ohm: ParameterGrid = ParameterGrid(0.03, 0.53)
    tau1: ParameterGrid = ParameterGrid(1e2, 1e6, log=True)
    tau2: ParameterGrid = ParameterGrid(1e2, 1e6, log=True)
    r1: ParameterGrid = ParameterGrid(0.005, 0.105)
    r2: ParameterGrid = ParameterGrid(0.005, 0.105)
    refinements: int = 2
    shrink: float = 10.0

    def __post_init__(self) -> None:
        if self.refinements < 0:
            raise InputError(f"Expected refinements >= 0, got {self.refinements}")
        if self.shrink <= 1:
            raise InputError(f"Expected shrink > 1, got {self.shrink}")

    def grids(self) -> dict[str, ParameterGrid]:
        return {
            "r_ohm": self.r_ohm,
            "tau1": self.tau1,
            "tau2": self.tau2,
            "r1": self.r1,
            "r2": self.r2,
        }


@dataclass(frozen=True, eq=False)
class FitReport:
    params: BatteryParams
    times: FloatArray
    residuals: FloatArray
    grid_resolution: dict[str, float]
    pass_rms: tuple[float, ...]
    warnings: tuple[str, ...] = ()
    extras: dict[str, float] = field(default_factory=dict)

    @property
    def rms_v(self) -> float:
        return rms_error(self.residuals, np.zeros_like(self.residuals))

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        values: dict[str, object] = {
            "r_ohm": self.params.r_ohm,
            "r1": self.params.r1,
            "c1": self.params.c1,
            "r2": self.params.r2,
            "c2": self.params.c2,
            "capacity_ah": self.params.capacity_ah,
            "rms_v": self.rms_v,
            "pass_rms": self.pass_rms,
        }
        values.update({f"resolution_{key}": value for key, value in self.grid_resolution.items()})
        values.update(self.extras)
        values["warnings"] = ";".join(self.warnings)
        write_key_values(values, directory / "fit_report.txt")
        ResidualFrame.from_columns(t_s=self.times, residual_v=self.residuals).to_csv(
            directory / "residuals.csv"
        )


def rc_response(currents: FloatArray, dt_s: float, tau_s: float) -> FloatArray:
    """Unit-gain Euler RC response from rest; the RC voltage is R times this."""
    ratio = dt_s / tau_s
    return lfilter([0.0, ratio], [1.0, ratio - 1.0], currents)


def coulomb_soc(
    log: SimulationLog, initial_soc: float, capacity_as: float
) -> FloatArray:
    # forward quadrature reproduces the Euler plant sample for sample
    return coulomb_count(
        initial_soc, log.times, log.currents, capacity_as, method="forward"
    )


def model_voltage(
    log: SimulationLog,
    curve: OcvCurve,
    params: BatteryParams,
    initial_soc: float,
) -> FloatArray:
    dt_s = log.dt_s
    currents = log.currents
    soc = coulomb_soc(log, initial_soc, params.capacity_as)
    ocv = np.interp(soc, curve.soc, curve.voltage)
    v1 = params.r1 * rc_response(currents, dt_s, params.tau1)
    v2 = params.r2 * rc_response(currents, dt_s, params.tau2)
    return ocv - v1 - v2 - params.r_ohm * currents


def model_frame(
    log: SimulationLog, curve: OcvCurve, params: BatteryParams, initial_soc: float
) -> ModelFrame:
    soc = coulomb_soc(log, initial_soc, params.capacity_as)
    return ModelFrame.from_columns(
        t_s=log.times,
        voltage_v=log.voltages,
        model_v=model_voltage(log, curve, params, initial_soc),
        soc_cc=soc,
        ocv_v=np.interp(soc, curve.soc, curve.voltage),
    )


def fit_parameters(
    log: SimulationLog,
    curve: OcvCurve,
    search: FitSearch | None = None,
    *,
    initial_soc: float = 1.0,
    capacity_as: float = NOMINAL_CAPACITY_AH * 3600.0,
) -> FitReport:
    """Coarse-to-fine grid search over (R, τ1, R1, τ2, R2) minimising voltage RMS."""
    search = FitSearch() if search is None else search
    currents = log.currents
    voltages = log.voltages
    if len(currents) == 0:
        raise InputError("Expected a non-empty log")
    dt_s = log.dt_s
    warnings: list[str] = []
    if np.ptp(currents) <= 1e-12 * max(1.0, float(np.abs(currents).max())):
        _logger.warning(UNIDENTIFIABLE_WARNING)
        warnings.append(UNIDENTIFIABLE_WARNING)

    soc = coulomb_soc(log, initial_soc, capacity_as)
    # residual = d + R*I + R1*f1 + R2*f2 with d = V - Voc(soc)
    base = voltages - np.interp(soc, curve.soc, curve.voltage)
    n = len(base)
    cache: dict[float, FloatArray] = {}

    def response(tau: float) -> FloatArray:
        if tau not in cache:
            cache[tau] = rc_response(currents, dt_s, tau)
        return cache[tau]

    grids = search.grids()
    steps = {name: grid.step for name, grid in grids.items()}
    candidates = {name: grid.values() for name, grid in grids.items()}
    best: tuple[float, float, float, float, float, float] | None = None
    pass_rms: list[float] = []
    for pass_index in range(search.refinements + 1):
        if pass_index > 0:
            assert best is not None
            incumbent = dict(zip(("r_ohm", "tau1", "tau2", "r1", "r2"), best[1:]))
            for name in grids:
                steps[name] /= search.shrink
                candidates[name] = grids[name].around(incumbent[name], steps[name])
        coefficients = np.array(
            [
                (1.0, r, r1, r2)
                for r, r1, r2 in itertools.product(
                    candidates["r_ohm"], candidates["r1"], candidates["r2"]
                )
            ]
        )
        for tau1, tau2 in itertools.product(candidates["tau1"], candidates["tau2"]):
            basis = np.column_stack((base, currents, response(tau1), response(tau2)))
            gram = basis.T @ basis / n
            mse = np.einsum("mi,ij,mj->m", coefficients, gram, coefficients)
            index = int(np.argmin(mse))
            _, r, r1, r2 = coefficients[index]
            key = (float(mse[index]), float(r), float(tau1), float(tau2), float(r1), float(r2))
            if best is None or key < best:
                best = key
        assert best is not None
        pass_rms.append(math.sqrt(max(best[0], 0.0)))
        _logger.debug("fit pass %d: rms %.6g V at %s", pass_index, pass_rms[-1], best[1:])

    assert best is not None
    _, r, tau1, tau2, r1, r2 = best
    params = BatteryParams(
        r_ohm=r, r1=r1, c1=tau1 / r1, r2=r2, c2=tau2 / r2, capacity_as=capacity_as
    )
    residuals = voltages - model_voltage(log, curve, params, initial_soc)
    resolution = {
        name: (10.0 ** steps[name] - 1.0 if grids[name].log else steps[name])
        for name in grids
    }
    return FitReport(
        params=params,
        times=log.times,
        residuals=residuals,
        grid_resolution=resolution,
        pass_rms=tuple(pass_rms),
        warnings=tuple(warnings),
    )


@dataclass(frozen=True, eq=False)
class CovarianceMatch:
    q_cov: FloatArray
    r_cov: float
    q_scale: float
    r_scale: float
    iterations: int
    converged: bool


def match_noise_covariances(
    innovations: FloatArray,
    h_trace: FloatArray,
    p_trace: FloatArray,
    r_guess: float,
    q_guess: FloatArray,
    *,
    max_iterations: int = 20,
    window: int = 25,
    band: tuple[float, float] = (0.9, 1.1),
) -> CovarianceMatch:
    """Scale R and Q so that empirical and predicted innovation power agree.

    R follows the innovation variance directly; Q gets one scalar factor matched on
    the smoothed power of the state corrections K·ν.
    """
    innovations = np.asarray(innovations, dtype=np.float64)
    h_trace = np.asarray(h_trace, dtype=np.float64)
    p_trace = np.asarray(p_trace, dtype=np.float64)
    q_guess = np.asarray(q_guess, dtype=np.float64)
    if not (math.isfinite(r_guess) and r_guess > 0):
        raise InputError(f"Expected r_guess > 0, got {r_guess}")
    if not float(np.trace(q_guess)) > 0:
        raise InputError("Expected q_guess with a positive trace")
    if h_trace.shape != (len(innovations), 3) or p_trace.shape != (len(innovations), 3, 3):
        raise InputError(
            f"Expected h_trace (n, 3) and p_trace (n, 3, 3) for n={len(innovations)}, "
            f"got {h_trace.shape} and {p_trace.shape}"
        )
    usable = (
        np.isfinite(innovations)
        & np.all(np.isfinite(h_trace), axis=1)
        & np.all(np.isfinite(p_trace), axis=(1, 2))
    )
    if usable.sum() < MIN_MATCHING_SAMPLES:
        raise InputError(
            f"Expected at least {MIN_MATCHING_SAMPLES} innovations, got {int(usable.sum())}"
        )
    nu = innovations[usable]
    h = h_trace[usable]
    p = p_trace[usable]
    ph = np.einsum("kij,kj->ki", p, h)
    hph = np.einsum("ki,ki->k", h, ph)
    gain_power = np.einsum("ki,ki->k", ph, ph)
    nu2 = nu**2
    smoothed = uniform_filter1d(nu2, size=min(window, len(nu2)), mode="nearest")
    empirical = float(nu2.mean())

    r = float(r_guess)
    scale = 1.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        s = scale * hph + r
        ratio_r = empirical / float(s.mean())
        # weight of each sample in the state correction, |K|^2 with K = c P h / s
        weights = scale**2 * gain_power / s**2
        ratio_q = float(weights @ smoothed) / float(weights @ s)
        _logger.debug(
            "covariance matching %d: r ratio %.4f, q ratio %.4f", iterations, ratio_r, ratio_q
        )
        if band[0] <= ratio_r <= band[1] and band[0] <= ratio_q <= band[1]:
            converged = True
            break
        residual = empirical - scale * float(hph.mean())
        r = residual if residual > 0 else r * ratio_r
        scale *= ratio_q
    return CovarianceMatch(
        q_cov=scale * q_guess,
        r_cov=r,
        q_scale=scale,
        r_scale=r / r_guess,
        iterations=iterations,
        converged=converged,
    )
