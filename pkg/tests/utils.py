from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from battery_xkf.battery_model import BatteryParams
from battery_xkf.battery_model import BatteryState
from battery_xkf.battery_model import discrete_matrices
from battery_xkf.battery_model import NoiseSpec
from battery_xkf.battery_model import simulate
from battery_xkf.battery_model import system_matrices
from battery_xkf.harness import DriveCycle
from battery_xkf.harness import generate_dst_like
from battery_xkf.ocv_curve import builtin_curve
from battery_xkf.ocv_curve import OcvCurve

if TYPE_CHECKING:
    from collections.abc import Sequence

    from battery_xkf._typing import FloatArray
    from battery_xkf.battery_model import SimulationLog


def reference_params() -> BatteryParams:
    return BatteryParams.reference_cell()


def fast_params() -> BatteryParams:
    # RC time constants of 1 s and 4 s
    return BatteryParams(
        r_ohm=0.05, r1=0.01, c1=100.0, r2=0.02, c2=200.0, capacity_as=3600.0
    )


def three_knot_curve() -> OcvCurve:
    return OcvCurve(((0.0, 2.0), (0.5, 3.3), (1.0, 3.6)))


def affine_curve() -> OcvCurve:
    return OcvCurve(((0.0, 3.0), (0.5, 3.5), (1.0, 4.0)))


def flat_curve() -> OcvCurve:
    # constant slope of 0.6 V per unit soc
    return OcvCurve(((0.0, 3.0), (0.5, 3.3), (1.0, 3.6)))


def write_ocv(
    path: Path, rows: Sequence[tuple[float, float]], temperature_c: float | None = None
) -> Path:
    lines = [] if temperature_c is None else [f"# temperature_c={temperature_c}"]
    lines.append("soc,voltage_v")
    lines.extend(f"{soc},{voltage}" for soc, voltage in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def constant_cycle(current_a: float, n: int, dt_s: float = 1.0) -> DriveCycle:
    return DriveCycle("constant", dt_s, np.full(n, current_a))


def dst_log(
    soc0: float = 1.0,
    duration_s: float = 720.0,
    measurement_std: float = 0.0,
    seed: int = 0,
) -> SimulationLog:
    return simulate(
        reference_params(),
        builtin_curve(20.0),
        generate_dst_like(duration_s, 2.23),
        BatteryState(0.0, 0.0, soc0),
        NoiseSpec(measurement_std=measurement_std, seed=seed),
    )


def split_kf_covariances(
    params: BatteryParams,
    p0: FloatArray,
    q: FloatArray,
    r: float,
    h_rows: FloatArray,
    dt_s: float,
) -> FloatArray:
    """Textbook discrete Kalman covariance recursion, Joseph-form update.

    Measurement variance r/dt, then F P F^T + dt Q with the Euler transition F.
    """
    f, _ = discrete_matrices(params, dt_s)
    r_d = r / dt_s
    p = p0.copy()
    out = []
    for h in h_rows:
        s = h @ p @ h + r_d
        k = p @ h / s
        joseph = np.eye(3) - np.outer(k, h)
        p = joseph @ p @ joseph.T + np.outer(k, k) * r_d
        p = f @ p @ f.T + dt_s * q
        out.append(p)
    return np.array(out)


def affine_kf_states(
    params: BatteryParams,
    curve: OcvCurve,
    x0: FloatArray,
    p0: FloatArray,
    q: FloatArray,
    r: float,
    log: SimulationLog,
) -> FloatArray:
    """Kalman filter on an affine OCV curve; the covariance prediction
    Euler-integrates the Lyapunov equation."""
    a, b = system_matrices(params)
    dt_s = log.dt_s
    offset = curve.voltage[0]
    slope = (curve.voltage[-1] - curve.voltage[0]) / (curve.soc[-1] - curve.soc[0])
    h = np.array([-1.0, -1.0, slope])
    x = x0.copy()
    p = p0.copy()
    out = []
    for current, voltage in zip(log.currents, log.voltages):
        out.append(x.copy())
        predicted = offset + h @ x - params.r_ohm * current
        s = h @ p @ h + r / dt_s
        k = p @ h / s
        x = x + k * (voltage - predicted)
        p = p - np.outer(k, k) * s
        p = p + dt_s * (a @ p + p @ a.T + q)
        x = x + dt_s * (a @ x + b * current)
    return np.array(out)
