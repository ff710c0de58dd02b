from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import field
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from battery_xkf.errors import InputError
from battery_xkf.errors import OcvParseError
from battery_xkf.errors import OcvValidationError
from battery_xkf.errors import SocRangeError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from battery_xkf._typing import FloatArray

HEADER = "soc,voltage_v"
TEMPERATURE_PREFIX = "# temperature_c="
DEFAULT_TEMPERATURE_C = 20.0

_BUILTIN = {
    20.0: "ocv_lfp_20c.csv",
    40.0: "ocv_lfp_40c.csv",
}


@dataclass(frozen=True)
class OcvCurve:
    """Monotone piecewise-linear SoC to open-circuit-voltage table for one temperature."""

    knots: tuple[tuple[float, float], ...]
    temperature_c: float = DEFAULT_TEMPERATURE_C
    _soc: FloatArray = field(init=False, repr=False, compare=False)
    _voltage: FloatArray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        knots = tuple((float(soc), float(voltage)) for soc, voltage in self.knots)
        self._validate_knots(knots)
        soc = np.array([k[0] for k in knots], dtype=np.float64)
        voltage = np.array([k[1] for k in knots], dtype=np.float64)
        soc.flags.writeable = False
        voltage.flags.writeable = False
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "_soc", soc)
        object.__setattr__(self, "_voltage", voltage)

    @staticmethod
    def _validate_knots(knots: Sequence[tuple[float, float]]) -> None:
        for index, (soc, voltage) in enumerate(knots):
            if not (math.isfinite(soc) and math.isfinite(voltage)):
                raise OcvValidationError(f"non-finite value ({soc}, {voltage})", knot=index)
            if not 0.0 <= soc <= 1.0:
                raise SocRangeError(f"Expected knot soc in [0, 1], got {soc} at knot {index}")
        for index in range(1, len(knots)):
            if knots[index][0] <= knots[index - 1][0]:
                raise OcvValidationError(
                    f"soc {knots[index][0]} does not increase past {knots[index - 1][0]}",
                    knot=index,
                )
            if knots[index][1] <= knots[index - 1][1]:
                raise OcvValidationError(
                    f"voltage {knots[index][1]} does not increase past "
                    f"{knots[index - 1][1]}",
                    knot=index,
                )
        if len(knots) < 3:
            raise OcvValidationError(
                f"Expected at least 3 knots, got {len(knots)}", knot=max(len(knots) - 1, 0)
            )
        if knots[0][0] != 0.0:
            raise OcvValidationError(f"first knot must be at soc 0, got {knots[0][0]}", knot=0)
        if knots[-1][0] != 1.0:
            raise OcvValidationError(
                f"last knot must be at soc 1, got {knots[-1][0]}", knot=len(knots) - 1
            )

    @property
    def soc(self) -> FloatArray:
        return self._soc

    @property
    def voltage(self) -> FloatArray:
        return self._voltage

    @property
    def segment_slopes(self) -> FloatArray:
        return np.diff(self._voltage) / np.diff(self._soc)

    @property
    def max_slope(self) -> float:
        return float(self.segment_slopes.max())

    def voltage_at(self, soc: float) -> float:
        return voltage_at(self, soc)

    def slope_at(self, soc: float) -> float:
        return slope_at(self, soc)


def voltage_at(curve: OcvCurve, soc: float) -> float:
    # np.interp clamps to the boundary knots outside [0, 1]
    return float(np.interp(soc, curve.soc, curve.voltage))


def slope_at(curve: OcvCurve, soc: float) -> float:
    if math.isnan(soc):
        return math.nan
    slopes = curve.segment_slopes
    if soc <= 0.0:
        return float(slopes[0])
    if soc >= 1.0:
        return float(slopes[-1])
    index = int(np.searchsorted(curve.soc, soc, side="right")) - 1
    if curve.soc[index] != soc:
        return float(slopes[index])
    widths = np.diff(curve.soc)
    h = min(1e-4, 0.5 * min(widths[index - 1], widths[index]))
    return (voltage_at(curve, soc + h) - voltage_at(curve, soc - h)) / (2.0 * h)


def load_ocv_csv(path: str | Path) -> OcvCurve:
    text = Path(path).read_text(encoding="utf-8")
    return _parse_ocv(text, str(path))


def _parse_ocv(text: str, source: str) -> OcvCurve:
    temperature = DEFAULT_TEMPERATURE_C
    knots: list[tuple[float, float]] = []
    seen_header = False
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(TEMPERATURE_PREFIX):
            try:
                temperature = float(line[len(TEMPERATURE_PREFIX) :])
            except ValueError:
                raise OcvParseError(
                    f"{source}: bad temperature {line!r}", line=number
                ) from None
            continue
        if line.startswith("#"):
            continue
        if not seen_header:
            if line.replace(" ", "") != HEADER:
                raise OcvParseError(
                    f"{source}: expected header {HEADER!r}, got {line!r}", line=number
                )
            seen_header = True
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise OcvParseError(
                f"{source}: expected 2 columns, got {len(cells)}", line=number
            )
        try:
            knots.append((float(cells[0]), float(cells[1])))
        except ValueError:
            raise OcvParseError(
                f"{source}: non-numeric row {line!r}", line=number
            ) from None
    if not seen_header:
        raise InputError(f"{source}: no {HEADER!r} header found")
    return OcvCurve(tuple(knots), temperature_c=temperature)


def save_ocv_csv(curve: OcvCurve, path: str | Path) -> None:
    lines = [f"{TEMPERATURE_PREFIX}{curve.temperature_c!r}", HEADER]
    lines.extend(f"{soc!r},{voltage!r}" for soc, voltage in curve.knots)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def builtin_curve(temperature_c: float = DEFAULT_TEMPERATURE_C) -> OcvCurve:
    """Digitized LiFePO4 surrogate curves shipped with the package (20 and 40 °C)."""
    try:
        name = _BUILTIN[float(temperature_c)]
    except KeyError:
        raise InputError(
            f"No built-in OCV curve at {temperature_c} °C, available: {sorted(_BUILTIN)}"
        ) from None
    resource = resources.files("battery_xkf.ocv_curve").joinpath(f"data/{name}")
    return _parse_ocv(resource.read_text(encoding="utf-8"), name)
