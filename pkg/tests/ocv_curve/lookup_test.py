from __future__ import annotations

import numpy as np
import pytest

from battery_xkf.errors import OcvValidationError
from battery_xkf.errors import SocRangeError
from battery_xkf.ocv_curve import builtin_curve
from battery_xkf.ocv_curve import OcvCurve
from battery_xkf.ocv_curve import slope_at
from battery_xkf.ocv_curve import voltage_at
from tests.utils import three_knot_curve


@pytest.mark.parametrize(
    ("soc", "expected"),
    [
        (0.25, 2.65),
        (0.5, 3.3),
        (1.2, 3.6),
        (-0.3, 2.0),
        (0.0, 2.0),
        (1.0, 3.6),
    ],
)
def test_voltage_at(soc: float, expected: float) -> None:
    assert voltage_at(three_knot_curve(), soc) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    ("soc", "expected"),
    [
        (0.25, 2.6),
        (0.75, 0.6),
        (0.0, 2.6),
        (1.0, 0.6),
        (-0.5, 2.6),
        (1.5, 0.6),
    ],
)
def test_slope_at_segments_and_ends(soc: float, expected: float) -> None:
    assert slope_at(three_knot_curve(), soc) == pytest.approx(expected, rel=1e-12)


def test_slope_at_interior_knot() -> None:
    # central difference straddles both adjacent segments
    assert slope_at(three_knot_curve(), 0.5) == pytest.approx(1.6, abs=1e-8)


def test_methods_delegate() -> None:
    curve = three_knot_curve()
    assert curve.voltage_at(0.25) == voltage_at(curve, 0.25)
    assert curve.slope_at(0.75) == slope_at(curve, 0.75)
    assert curve.max_slope == pytest.approx(2.6)
    np.testing.assert_allclose(curve.segment_slopes, [2.6, 0.6])


@pytest.mark.parametrize("temperature_c", [20.0, 40.0])
def test_builtin_curve_properties(temperature_c: float) -> None:
    curve = builtin_curve(temperature_c)
    assert curve.temperature_c == temperature_c
    assert len(curve.knots) == 21
    grid = np.linspace(0.0, 1.0, 2001)
    voltages = np.array([voltage_at(curve, s) for s in grid])
    slopes = np.array([slope_at(curve, s) for s in grid])
    assert voltages.min() >= curve.voltage.min()
    assert voltages.max() <= curve.voltage.max()
    assert np.all(slopes > 0)
    # Lipschitz bound with the largest segment slope
    assert np.all(np.abs(np.diff(voltages)) <= curve.max_slope * np.diff(grid) + 1e-12)


def test_builtin_curve_shape() -> None:
    cold = builtin_curve(20.0)
    warm = builtin_curve(40.0)
    # flat plateau near 3.3 V, steep ends
    assert voltage_at(cold, 0.5) == pytest.approx(3.3)
    assert slope_at(cold, 0.5) < 0.5
    assert slope_at(cold, 0.05) > 5.0
    assert slope_at(cold, 0.975) > 2.0
    for soc in np.linspace(0.2, 1.0, 17):
        assert voltage_at(warm, soc) == voltage_at(cold, soc)
    for soc in (0.05, 0.1, 0.15):
        assert voltage_at(warm, soc) < voltage_at(cold, soc)
    assert cold.max_slope == pytest.approx(18.0)
    assert warm.max_slope == pytest.approx(12.0)


@pytest.mark.parametrize(
    ("knots", "error", "knot"),
    [
        (((0.0, 2.0), (0.5, 3.3), (0.4, 3.4)), OcvValidationError, 2),
        (((0.0, 2.0), (0.5, 3.3), (1.0, 3.2)), OcvValidationError, 2),
        (((0.0, 2.0), (1.0, 3.6)), OcvValidationError, 1),
        (((0.1, 2.0), (0.5, 3.3), (1.0, 3.6)), OcvValidationError, 0),
        (((0.0, 2.0), (0.5, 3.3), (0.9, 3.6)), OcvValidationError, 2),
        (((0.0, 2.0), (0.5, float("nan")), (1.0, 3.6)), OcvValidationError, 1),
    ],
)
def test_invalid_knots(
    knots: tuple[tuple[float, float], ...], error: type[OcvValidationError], knot: int
) -> None:
    with pytest.raises(error, match=f"knot {knot}") as info:
        OcvCurve(knots)
    assert info.value.knot == knot


def test_soc_out_of_range() -> None:
    with pytest.raises(SocRangeError, match="1.2"):
        OcvCurve(((0.0, 2.0), (0.5, 3.3), (1.2, 3.6)))


def test_curve_is_immutable() -> None:
    curve = three_knot_curve()
    with pytest.raises(ValueError, match="read-only"):
        curve.soc[0] = 0.5


def test_nan_soc_propagates() -> None:
    curve = three_knot_curve()
    assert np.isnan(voltage_at(curve, float("nan")))
    assert np.isnan(slope_at(curve, float("nan")))
