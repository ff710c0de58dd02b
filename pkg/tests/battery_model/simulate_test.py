from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import pytest

from battery_xkf.battery_model import BatteryParams
from battery_xkf.battery_model import BatteryState
from battery_xkf.battery_model import coulomb_count
from battery_xkf.battery_model import DISCHARGE_CUTOFF_V
from battery_xkf.battery_model import load_params
from battery_xkf.battery_model import NoiseSpec
from battery_xkf.battery_model import save_params
from battery_xkf.battery_model import simulate
from battery_xkf.battery_model import SimulationLog
from battery_xkf.battery_model import terminal_voltage
from battery_xkf.errors import InputError
from battery_xkf.harness import generate_fuds_like
from battery_xkf.ocv_curve import builtin_curve
from tests.utils import constant_cycle
from tests.utils import dst_log
from tests.utils import reference_params

if TYPE_CHECKING:
    from pathlib import Path


def test_coulomb_count_zero_current() -> None:
    times = np.arange(10.0)
    result = coulomb_count(0.7, times, np.zeros(10), 8028.0)
    np.testing.assert_array_equal(result, np.full(10, 0.7))


def test_coulomb_count_half_hour_at_one_c() -> None:
    times = np.arange(1801.0)
    result = coulomb_count(1.0, times, np.full(1801, 2.23), 2.23 * 3600.0)
    assert result[-1] == pytest.approx(0.5, abs=1e-12)


def test_coulomb_count_triangular_ramp() -> None:
    times = np.linspace(0.0, 100.0, 101)
    currents = np.linspace(0.0, 2.0, 101)
    result = coulomb_count(1.0, times, currents, 8028.0)
    assert 1.0 - result[-1] == pytest.approx(100.0 / 8028.0, rel=1e-12)
    assert 100.0 / 8028.0 == pytest.approx(0.012456, abs=1e-6)


def test_coulomb_count_forward_quadrature() -> None:
    times = np.array([0.0, 1.0, 3.0])
    currents = np.array([1.0, 2.0, 5.0])
    result = coulomb_count(0.5, times, currents, 10.0, method="forward")
    np.testing.assert_allclose(result, [0.5, 0.4, 0.0])


def test_coulomb_count_is_unclamped() -> None:
    times = np.arange(3.0)
    result = coulomb_count(0.0, times, np.ones(3), 1.0)
    assert result[-1] == pytest.approx(-2.0)


@pytest.mark.parametrize(
    ("times", "currents", "match"),
    [
        ([0.0, 1.0, 1.0], [0.0, 0.0, 0.0], "increasing"),
        ([0.0, 2.0, 1.0], [0.0, 0.0, 0.0], "increasing"),
        ([0.0, 1.0], [0.0, 0.0, 0.0], "matching"),
        ([], [], "at least one"),
    ],
)
def test_coulomb_count_errors(times: list[float], currents: list[float], match: str) -> None:
    with pytest.raises(InputError, match=match):
        coulomb_count(1.0, np.array(times), np.array(currents), 8028.0)


def test_coulomb_count_unknown_method() -> None:
    with pytest.raises(InputError, match="quadrature"):
        coulomb_count(1.0, np.arange(2.0), np.zeros(2), 1.0, method="simpson")  # type: ignore[arg-type]


def test_noise_free_log_is_exact() -> None:
    log = dst_log()
    params = reference_params()
    curve = builtin_curve(20.0)
    expected = [
        terminal_voltage(params, curve, log.true_state(k), float(log.currents[k]))
        for k in range(len(log))
    ]
    np.testing.assert_array_equal(log.voltages, expected)
    assert log.times[0] == 0.0
    assert log.dt_s == 1.0
    assert len(log) == 720


def test_measurement_noise_level() -> None:
    log = simulate(
        reference_params(),
        builtin_curve(20.0),
        constant_cycle(0.0, 10_000),
        BatteryState(0.0, 0.0, 0.5),
        NoiseSpec(measurement_std=0.04, seed=3),
    )
    noise = log.voltages - 3.3
    assert np.std(noise) == pytest.approx(0.04, abs=0.002)


def test_same_seed_is_bit_identical() -> None:
    first = dst_log(measurement_std=0.04, seed=11)
    second = dst_log(measurement_std=0.04, seed=11)
    pd.testing.assert_frame_equal(first.dataframe, second.dataframe)
    third = dst_log(measurement_std=0.04, seed=12)
    assert not np.array_equal(first.voltages, third.voltages)


def test_process_noise_moves_state() -> None:
    log = simulate(
        reference_params(),
        builtin_curve(20.0),
        constant_cycle(0.0, 50),
        BatteryState(0.0, 0.0, 0.5),
        NoiseSpec.uniform(1e-3, 0.0, seed=1),
    )
    assert np.std(np.diff(log.column("v1_true"))) > 0
    assert np.all((log.soc_true >= 0) & (log.soc_true <= 1))


def test_charge_conservation() -> None:
    params = reference_params()
    cycle = generate_fuds_like(3600.0, 2.23, seed=4)
    log = simulate(
        params, builtin_curve(20.0), cycle, BatteryState(0.0, 0.0, 0.9), NoiseSpec()
    )
    reference = coulomb_count(0.9, log.times, log.currents, params.capacity_as)
    tolerance = 10.0 * cycle.dt_s / params.capacity_as
    assert np.max(np.abs(log.soc_true - reference)) <= tolerance
    forward = coulomb_count(
        0.9, log.times, log.currents, params.capacity_as, method="forward"
    )
    np.testing.assert_allclose(log.soc_true, forward, atol=1e-12)


def test_cutoff_stops_the_log() -> None:
    log = simulate(
        reference_params(),
        builtin_curve(20.0),
        constant_cycle(2.23, 4000),
        BatteryState(0.0, 0.0, 1.0),
        NoiseSpec(),
        cutoff_v=DISCHARGE_CUTOFF_V + 0.5,
    )
    assert 0 < len(log) < 4000
    assert log.voltages.min() >= DISCHARGE_CUTOFF_V + 0.5


@pytest.mark.parametrize(
    ("kwargs", "match"),
    [
        ({"process_std": (0.1, -0.1, 0.0)}, "standard deviations"),
        ({"measurement_std": float("nan")}, "standard deviations"),
        ({"process_std": (0.1, 0.1)}, "3 process"),
    ],
)
def test_noise_spec_validation(kwargs: dict[str, object], match: str) -> None:
    with pytest.raises(InputError, match=match):
        NoiseSpec(**kwargs)  # type: ignore[arg-type]


def test_log_csv_round_trip(tmp_path: Path) -> None:
    log = dst_log(measurement_std=0.01, seed=2)
    log.to_csv(tmp_path / "log.csv")
    result = SimulationLog.read_csv(tmp_path / "log.csv")
    pd.testing.assert_frame_equal(result.dataframe, log.dataframe)


def test_log_without_truth_columns(tmp_path: Path) -> None:
    path = tmp_path / "field.csv"
    path.write_text("t_s,current_a,voltage_v\n0,1.0,3.3\n1,1.0,3.29\n", encoding="utf-8")
    log = SimulationLog.read_csv(path)
    assert np.all(np.isnan(log.soc_true))
    assert log.dt_s == 1.0


def test_log_missing_required_column(tmp_path: Path) -> None:
    path = tmp_path / "field.csv"
    path.write_text("t_s,current_a\n0,1.0\n", encoding="utf-8")
    with pytest.raises(InputError, match="voltage_v"):
        SimulationLog.read_csv(path)


def test_single_sample_log_keeps_cycle_period(tmp_path: Path) -> None:
    log = simulate(
        reference_params(),
        builtin_curve(20.0),
        constant_cycle(0.0, 1, dt_s=0.5),
        BatteryState(0.0, 0.0, 0.5),
        NoiseSpec(),
    )
    assert len(log) == 1
    assert log.dt_s == 0.5
    log.to_csv(tmp_path / "log.csv")
    with pytest.raises(InputError, match="2 samples"):
        SimulationLog.read_csv(tmp_path / "log.csv").dt_s  # noqa: B018


def test_sample_period_validation() -> None:
    log = simulate(
        reference_params(),
        builtin_curve(20.0),
        constant_cycle(0.0, 3),
        BatteryState(0.0, 0.0, 0.5),
        NoiseSpec(),
    )
    with pytest.raises(InputError, match="dt_s"):
        log.with_sample_period(0.0)


def test_params_round_trip(tmp_path: Path) -> None:
    params = BatteryParams(0.2, 0.01, 3000.0, 0.02, 5e5, 7200.0)
    save_params(params, tmp_path / "params.txt")
    assert load_params(tmp_path / "params.txt") == params


def test_params_file_example(tmp_path: Path) -> None:
    path = tmp_path / "params.txt"
    path.write_text(
        "# reference cell\nr_ohm=0.18\nr1=0.035\nc1=1e6\nr2=0.035\nc2=1e6\ncapacity_ah=2.23\n",
        encoding="utf-8",
    )
    assert load_params(path) == reference_params()


@pytest.mark.parametrize(
    ("text", "match"),
    [
        ("r_ohm=0.18\n", "missing"),
        ("r_ohm=0.18\nr1=0.035\nc1=1e6\nr2=0.035\nc2=1e6\ncapacity_ah=2.23\nx=1\n", "unknown"),
        ("r_ohm=abc\nr1=0.035\nc1=1e6\nr2=0.035\nc2=1e6\ncapacity_ah=2.23\n", "r_ohm"),
        ("r_ohm 0.18\n", "key=value"),
        ("r_ohm=0.18\nr_ohm=0.2\n", "duplicate"),
    ],
)
def test_params_file_errors(tmp_path: Path, text: str, match: str) -> None:
    path = tmp_path / "params.txt"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(InputError, match=match):
        load_params(path)
