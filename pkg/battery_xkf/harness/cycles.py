from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd

from battery_xkf.errors import CycleFormatError
from battery_xkf.errors import InputError
from battery_xkf.frames import TimeSeriesFrame

if TYPE_CHECKING:
    from battery_xkf._typing import FloatArray

DST_PERIOD_S = 360
# net discharge of one template period, in units of peak current times seconds
DST_NET_CHARGE_PER_PEAK = 45.0
_TIMING_RTOL = 1e-6
_SMOOTHING_WINDOW = 5


class CycleFrame(TimeSeriesFrame):
    columns = ("t_s", "current_a")


@dataclass(frozen=True, eq=False)
class DriveCycle:
    name: str
    dt_s: float
    currents: FloatArray

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt_s) and self.dt_s > 0):
            raise InputError(f"Expected dt_s > 0, got {self.dt_s}")
        currents = np.array(self.currents, dtype=np.float64)
        if currents.ndim != 1 or len(currents) == 0:
            raise InputError(f"Expected a non-empty 1-D current series, got shape {currents.shape}")
        if not np.all(np.isfinite(currents)):
            raise InputError(f"Drive cycle {self.name!r} contains non-finite currents")
        currents.flags.writeable = False
        object.__setattr__(self, "currents", currents)

    def __len__(self) -> int:
        return len(self.currents)

    @property
    def times(self) -> FloatArray:
        return np.arange(len(self.currents)) * self.dt_s

    @property
    def duration_s(self) -> float:
        return len(self.currents) * self.dt_s

    def with_bias(self, bias_a: float) -> DriveCycle:
        return DriveCycle(self.name, self.dt_s, self.currents + bias_a)


def _validate_positive(**values: float) -> None:
    for name, value in values.items():
        if not (math.isfinite(value) and value > 0):
            raise InputError(f"Expected {name} > 0, got {value}")


@functools.lru_cache(maxsize=None)
def dst_template() -> FloatArray:
    """Per-second fractions of peak current for one DST-like period."""
    resource = resources.files("battery_xkf.harness").joinpath("data/dst_template.csv")
    with resources.as_file(resource) as path:
        segments = pd.read_csv(path, comment="#")
    template = np.repeat(
        segments["fraction"].to_numpy(dtype=np.float64),
        segments["duration_s"].to_numpy(dtype=np.int64),
    )
    if len(template) != DST_PERIOD_S:
        raise AssertionError(f"DST template spans {len(template)} s, expected {DST_PERIOD_S}")
    template.flags.writeable = False
    return template


def _resample(per_second: FloatArray, duration_s: float, dt_s: float) -> FloatArray:
    n = int(round(duration_s / dt_s))
    index = np.floor(np.arange(n) * dt_s + 1e-9).astype(np.int64)
    return per_second[index % len(per_second)]


def generate_dst_like(duration_s: float, peak_a: float, dt_s: float = 1.0) -> DriveCycle:
    _validate_positive(duration_s=duration_s, peak_a=peak_a, dt_s=dt_s)
    currents = _resample(dst_template(), duration_s, dt_s) * peak_a
    return DriveCycle("dst", dt_s, currents)


def generate_fuds_like(
    duration_s: float, peak_a: float, dt_s: float = 1.0, seed: int = 0
) -> DriveCycle:
    """Urban-style surrogate: rests, discharge pulses and short regenerative spikes.

    Each pulse carries more charge than the spike that may follow it, so every
    profile discharges on balance.
    """
    _validate_positive(duration_s=duration_s, peak_a=peak_a, dt_s=dt_s)
    rng = np.random.default_rng(seed)
    needed = int(math.ceil(duration_s)) + _SMOOTHING_WINDOW
    pieces: list[FloatArray] = []
    length = 0
    while length < needed:
        rest = np.zeros(int(rng.integers(5, 31)))
        pulse_len = int(rng.integers(10, 41))
        level = rng.uniform(0.3, 1.0)
        pulse = level * (1.0 + 0.2 * rng.uniform(-1.0, 1.0, pulse_len))
        pieces.extend((rest, np.minimum(pulse, 1.0)))
        length += len(rest) + pulse_len
        if rng.uniform() < 0.6:
            spike = np.full(int(rng.integers(2, 6)), -rng.uniform(0.1, 0.4))
            pieces.append(spike)
            length += len(spike)
    raw = np.concatenate(pieces)
    kernel = np.full(_SMOOTHING_WINDOW, 1.0 / _SMOOTHING_WINDOW)
    smooth = np.clip(np.convolve(raw, kernel, mode="same"), -1.0, 1.0)
    currents = _resample(smooth, duration_s, dt_s) * peak_a
    return DriveCycle(f"fuds-{seed}", dt_s, currents)


def ingest_cycle_csv(path: str | Path) -> DriveCycle:
    frame = CycleFrame.read_csv(path)
    if len(frame) == 0:
        raise InputError(f"{path}: drive cycle has no samples")
    if len(frame) < 2:
        raise InputError(f"{path}: need at least 2 samples to infer the sample period")
    times = frame.column("t_s")
    dt_s = float(times[1] - times[0])
    if not dt_s > 0:
        raise CycleFormatError(f"{path}: time does not increase", row=2)
    intervals = np.diff(times)
    bad = np.abs(intervals - dt_s) > _TIMING_RTOL * dt_s
    if np.any(bad):
        row = int(np.argmax(bad)) + 2
        raise CycleFormatError(
            f"{path}: interval {intervals[row - 2]} differs from dt {dt_s}", row=row
        )
    return DriveCycle(Path(path).stem, dt_s, frame.column("current_a"))


def save_cycle_csv(cycle: DriveCycle, path: str | Path) -> None:
    CycleFrame.from_columns(t_s=cycle.times, current_a=cycle.currents).to_csv(path)
