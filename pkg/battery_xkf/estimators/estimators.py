from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from dataclasses import replace
from typing import Literal
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

from battery_xkf.battery_model import BatteryState
from battery_xkf.battery_model import discrete_matrices
from battery_xkf.battery_model import propagate
from battery_xkf.battery_model import system_matrices
from battery_xkf.battery_model import terminal_voltage
from battery_xkf.errors import InputError
from battery_xkf.errors import NumericalFailure
from battery_xkf.ocv_curve import slope_at
from battery_xkf.ocv_curve import voltage_at

if TYPE_CHECKING:
    from collections.abc import Sequence

    from battery_xkf._typing import FloatArray
    from battery_xkf.battery_model import BatteryParams
    from battery_xkf.ocv_curve import OcvCurve

_logger = logging.getLogger(__name__)

Riccati = Literal["split", "euler"]

UKF_ALPHA = 1e-3
UKF_BETA = 2.0
UKF_KAPPA = 0.0
UKF_JITTER = 1e-12

_SYMMETRY_TOL = 1e-12
_PSD_TOL = 1e-8


@dataclass(frozen=True)
class ObserverGain:
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 2.0

    def __post_init__(self) -> None:
        for name in ("k1", "k2", "k3"):
            if not math.isfinite(getattr(self, name)):
                raise InputError(f"Expected finite observer gain {name}, got {getattr(self, name)}")
        if self.k3 < 0:
            raise InputError(f"Expected k3 >= 0, got {self.k3}")

    def as_array(self) -> FloatArray:
        return np.array([self.k1, self.k2, self.k3])

    def substeps_for(self, curve: OcvCurve, dt_s: float) -> int:
        """Sub-steps that keep the output-injection correction monotone over one sample."""
        rate = self.k3 * curve.max_slope + abs(self.k1) + abs(self.k2)
        return max(1, math.ceil(rate * dt_s - 1e-9))


@dataclass(frozen=True, eq=False)
class KalmanConfig:
    q_cov: FloatArray
    r_cov: float
    p0: FloatArray
    riccati: Riccati = "split"

    def __post_init__(self) -> None:
        q_cov = self._as_matrix("q_cov", self.q_cov)
        p0 = self._as_matrix("p0", self.p0)
        if not np.linalg.eigvalsh(q_cov).min() >= -_SYMMETRY_TOL:
            raise InputError("Expected q_cov to be positive semidefinite")
        if not np.linalg.eigvalsh(p0).min() > 0:
            raise InputError("Expected p0 to be positive definite")
        if not (math.isfinite(self.r_cov) and self.r_cov > 0):
            raise InputError(f"Expected r_cov > 0, got {self.r_cov}")
        if self.riccati not in ("split", "euler"):
            raise InputError(f"Expected riccati 'split' or 'euler', got {self.riccati!r}")
        object.__setattr__(self, "q_cov", q_cov)
        object.__setattr__(self, "p0", p0)

    @staticmethod
    def _as_matrix(name: str, value: FloatArray) -> FloatArray:
        matrix = np.array(value, dtype=np.float64)
        if matrix.shape != (3, 3):
            raise InputError(f"Expected {name} of shape (3, 3), got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise InputError(f"Expected finite entries in {name}")
        if np.abs(matrix - matrix.T).max() > _SYMMETRY_TOL * max(1.0, np.abs(matrix).max()):
            raise InputError(f"Expected {name} to be symmetric")
        matrix.flags.writeable = False
        return matrix

    @classmethod
    def from_std(
        cls,
        process_std: float | Sequence[float],
        measurement_std: float,
        p0_diag: Sequence[float] = (1e-2, 1e-2, 0.25),
        riccati: Riccati = "split",
    ) -> KalmanConfig:
        std = np.broadcast_to(np.asarray(process_std, dtype=np.float64), (3,))
        return cls(
            q_cov=np.diag(std**2),
            r_cov=float(measurement_std) ** 2,
            p0=np.diag(np.asarray(p0_diag, dtype=np.float64)),
            riccati=riccati,
        )

    @classmethod
    def default(cls) -> KalmanConfig:
        return cls.from_std(0.01, 0.04)


@dataclass(frozen=True, eq=False)
class EstimatorState:
    x_hat: BatteryState
    p: FloatArray | None = None
    x_bar: BatteryState | None = None
    step: int = 0
    # bookkeeping of the last processed sample
    gain: FloatArray | None = None
    h_row: FloatArray | None = None
    p_prior: FloatArray | None = None
    innovation: float = 0.0
    innovation_var: float = math.nan

    def __post_init__(self) -> None:
        if self.p is not None and np.shape(self.p) != (3, 3):
            raise InputError(f"Expected covariance of shape (3, 3), got {np.shape(self.p)}")

    @property
    def covariance(self) -> FloatArray:
        if self.p is None:
            raise InputError("This estimator state carries no covariance")
        return self.p


def measurement_row(curve: OcvCurve, state: BatteryState) -> FloatArray:
    return np.array([-1.0, -1.0, slope_at(curve, state.soc)])


def riccati_step(
    p: FloatArray,
    a: FloatArray,
    h: FloatArray,
    q: FloatArray,
    r: float,
    dt_s: float,
    method: Riccati = "split",
) -> tuple[FloatArray, FloatArray, float]:
    """Advance P over one sample; returns (P, correction gain, innovation variance).

    ``split`` applies the measurement term in discrete form with variance r/dt and
    Euler-integrates the remaining Lyapunov part; ``euler`` is the plain Euler step
    of the continuous Riccati equation with K_f = P Hᵀ / r.
    """
    h = np.asarray(h, dtype=np.float64).reshape(-1)
    ph = p @ h
    if method == "split":
        s = float(h @ ph) + r / dt_s
        gain = ph / s
        p_upd = p - np.outer(gain, gain) * s
        p_next = p_upd + dt_s * (a @ p_upd + p_upd @ a.T + q)
    elif method == "euler":
        s = float(h @ ph) + r
        k_f = ph / r
        p_next = p + dt_s * (a @ p + p @ a.T + q - np.outer(k_f, k_f) * r)
        gain = dt_s * k_f
    else:
        raise InputError(f"Expected riccati 'split' or 'euler', got {method!r}")
    return 0.5 * (p_next + p_next.T), gain, s


def check_covariance(p: FloatArray, step: int) -> None:
    if not np.all(np.isfinite(p)):
        raise NumericalFailure("covariance has non-finite entries", step=step)
    lowest = float(np.linalg.eigvalsh(p).min())
    if lowest < -_PSD_TOL:
        raise NumericalFailure(
            f"covariance lost positive semidefiniteness (eigenvalue {lowest:.3e})", step=step
        )


def _validate_dt(dt_s: float) -> None:
    if not (math.isfinite(dt_s) and dt_s > 0):
        raise InputError(f"Expected dt_s > 0, got {dt_s}")


def nlo_step(
    params: BatteryParams,
    curve: OcvCurve,
    gain: ObserverGain,
    x_bar: BatteryState,
    current_a: float,
    v_measured: float,
    dt_s: float,
    *,
    substeps: int = 1,
) -> BatteryState:
    _validate_dt(dt_s)
    if substeps < 1:
        raise InputError(f"Expected substeps >= 1, got {substeps}")
    h = dt_s / substeps
    drop = params.r_ohm * current_a
    y1 = y2 = y3 = 0.0
    for _ in range(substeps):
        v_bar = voltage_at(curve, x_bar.soc + y3) - (x_bar.v1 + y1) - (x_bar.v2 + y2) - drop
        innovation = v_measured - v_bar
        y1 += h * gain.k1 * innovation
        y2 += h * gain.k2 * innovation
        y3 += h * gain.k3 * innovation
    v1, v2, soc = propagate(params, x_bar.v1, x_bar.v2, x_bar.soc, current_a, dt_s)
    return BatteryState(v1 + y1, v2 + y2, soc + y3)


def lkf_step(
    params: BatteryParams,
    curve: OcvCurve,
    cfg: KalmanConfig,
    est: EstimatorState,
    x_bar: BatteryState,
    current_a: float,
    v_measured: float,
    dt_s: float,
) -> EstimatorState:
    _validate_dt(dt_s)
    p = est.covariance
    a, _ = system_matrices(params)
    h = measurement_row(curve, x_bar)
    x_hat = est.x_hat.as_array()
    deviation = x_hat - x_bar.as_array()
    innovation = (
        v_measured - terminal_voltage(params, curve, x_bar, current_a) - float(h @ deviation)
    )
    p_next, gain, s = riccati_step(p, a, h, cfg.q_cov, cfg.r_cov, dt_s, cfg.riccati)
    check_covariance(p_next, est.step)
    corrected = x_hat + gain * innovation
    v1, v2, soc = propagate(
        params, corrected[0], corrected[1], corrected[2], current_a, dt_s
    )
    return EstimatorState(
        x_hat=BatteryState(v1, v2, soc),
        p=p_next,
        x_bar=est.x_bar,
        step=est.step + 1,
        gain=gain,
        h_row=h,
        p_prior=p,
        innovation=innovation,
        innovation_var=s,
    )


def xkf_step(
    params: BatteryParams,
    curve: OcvCurve,
    gain: ObserverGain,
    cfg: KalmanConfig,
    est: EstimatorState,
    current_a: float,
    v_measured: float,
    dt_s: float,
    *,
    substeps: int = 1,
) -> EstimatorState:
    """NLO then LKF. The LKF is linearized at the exogenous estimate belonging to
    this sample; the NLO then advances that estimate to the next sample."""
    if est.x_bar is None:
        raise InputError("XKF state needs an exogenous estimate x_bar")
    x_bar = est.x_bar
    x_bar_next = nlo_step(
        params, curve, gain, x_bar, current_a, v_measured, dt_s, substeps=substeps
    )
    updated = lkf_step(params, curve, cfg, est, x_bar, current_a, v_measured, dt_s)
    return replace(updated, x_bar=x_bar_next)


def ekf_step(
    params: BatteryParams,
    curve: OcvCurve,
    cfg: KalmanConfig,
    est: EstimatorState,
    current_a: float,
    v_measured: float,
    dt_s: float,
) -> EstimatorState:
    return lkf_step(params, curve, cfg, est, est.x_hat, current_a, v_measured, dt_s)


def unscented_weights(
    n: int, alpha: float = UKF_ALPHA, beta: float = UKF_BETA, kappa: float = UKF_KAPPA
) -> tuple[FloatArray, FloatArray]:
    lam = alpha**2 * (n + kappa) - n
    c = n + lam
    w_mean = np.full(2 * n + 1, 0.5 / c)
    w_mean[0] = lam / c
    w_cov = w_mean.copy()
    w_cov[0] += 1.0 - alpha**2 + beta
    return w_mean, w_cov


def _square_root(p: FloatArray, step: int, jitter: bool) -> FloatArray:
    try:
        return scipy.linalg.cholesky(p, lower=True)
    except np.linalg.LinAlgError:
        if not jitter:
            raise NumericalFailure("covariance has no Cholesky factor", step=step) from None
    _logger.warning("step %d: Cholesky failed, retrying with %.0e jitter", step, UKF_JITTER)
    try:
        return scipy.linalg.cholesky(p + UKF_JITTER * np.eye(len(p)), lower=True)
    except np.linalg.LinAlgError:
        raise NumericalFailure(
            "covariance has no Cholesky factor after jitter", step=step
        ) from None


def ukf_step(
    params: BatteryParams,
    curve: OcvCurve,
    cfg: KalmanConfig,
    est: EstimatorState,
    current_a: float,
    v_measured: float,
    dt_s: float,
    *,
    jitter: bool = False,
) -> EstimatorState:
    _validate_dt(dt_s)
    p = est.covariance
    x = est.x_hat.as_array()
    n = len(x)
    w_mean, w_cov = unscented_weights(n)
    spread = math.sqrt(n + UKF_ALPHA**2 * (n + UKF_KAPPA) - n)
    root = _square_root(p, est.step, jitter)
    offsets = np.vstack([np.zeros(n), spread * root.T, -spread * root.T])
    sigma = x + offsets
    drop = params.r_ohm * current_a
    z = np.array(
        [voltage_at(curve, point[2]) - point[0] - point[1] - drop for point in sigma]
    )
    # weights sum to one; anchoring at z[0] avoids cancelling the large centre weight
    z_hat = z[0] + float(w_mean[1:] @ (z[1:] - z[0]))
    dz = z - z_hat
    s = float(w_cov @ dz**2) + cfg.r_cov / dt_s
    cross = (w_cov * dz) @ offsets
    gain = cross / s
    innovation = v_measured - z_hat
    corrected = x + gain * innovation
    p_upd = p - np.outer(gain, gain) * s
    f, _ = discrete_matrices(params, dt_s)
    p_next = f @ p_upd @ f.T + dt_s * cfg.q_cov
    p_next = 0.5 * (p_next + p_next.T)
    check_covariance(p_next, est.step)
    v1, v2, soc = propagate(
        params, corrected[0], corrected[1], corrected[2], current_a, dt_s
    )
    return EstimatorState(
        x_hat=BatteryState(v1, v2, soc),
        p=p_next,
        step=est.step + 1,
        gain=gain,
        p_prior=p,
        innovation=innovation,
        innovation_var=s,
    )
