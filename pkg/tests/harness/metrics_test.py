from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import pytest

from battery_xkf.errors import InputError
from battery_xkf.estimators import EstimatorTrace
from battery_xkf.estimators import FilterRun
from battery_xkf.harness import compute_metrics
from battery_xkf.harness import divergence_onset
from battery_xkf.harness import exit_status
from battery_xkf.harness import FilterResult
from battery_xkf.harness import METRICS_COLUMNS
from battery_xkf.harness import RunMetrics
from battery_xkf.harness import write_metrics_csv

if TYPE_CHECKING:
    from pathlib import Path

    from battery_xkf._typing import FloatArray


def make_trace(error: FloatArray, soc_true: float = 0.5) -> EstimatorTrace:
    n = len(error)
    nan = np.full(n, math.nan)
    return EstimatorTrace.from_columns(
        t_s=np.arange(n, dtype=np.float64),
        soc_true=np.full(n, soc_true),
        soc_bar=nan,
        soc_hat=soc_true + np.asarray(error),
        v1_hat=nan,
        v2_hat=nan,
        p_soc=nan,
        innovation_v=nan,
    )


def make_result(name: str, metrics: RunMetrics | None, failed_at: int | None) -> FilterResult:
    trace = make_trace(np.zeros(0))
    run = FilterRun(name, trace, np.zeros((0, 3)), np.zeros((0, 3, 3)), failed_at)
    return FilterResult(run, metrics)


def test_compute_metrics() -> None:
    error = np.full(100, 0.005)
    error[:10] = 0.1
    error[30] = -0.03
    metrics = compute_metrics(make_trace(error), 0.02)
    # the excursion at sample 30 restarts the dwell
    assert metrics.convergence_time_s == 31.0
    assert metrics.max_overshoot == pytest.approx(0.03)
    assert metrics.terminal_error == pytest.approx(0.005)
    expected = math.sqrt((10 * 0.1**2 + 89 * 0.005**2 + 0.03**2) / 100)
    assert metrics.soc_rmse == pytest.approx(expected)
    assert metrics.saturation_count == 0


def test_convergence_is_relative_to_first_sample() -> None:
    error = np.zeros(80)
    trace = make_trace(error)
    shifted = EstimatorTrace(trace.dataframe.assign(t_s=trace.column("t_s") + 100.0))
    assert compute_metrics(shifted, 0.02).convergence_time_s == 0.0


@pytest.mark.parametrize("n", [30, 200])
def test_never_converged(n: int) -> None:
    error = np.full(n, 0.1)
    error[::2] = 0.0
    assert compute_metrics(make_trace(error), 0.02).convergence_time_s is None


def test_overshoot_from_below_and_zero_start() -> None:
    error = np.concatenate([np.linspace(-0.2, 0.04, 50), np.full(50, 0.01)])
    assert compute_metrics(make_trace(error), 0.02).max_overshoot == pytest.approx(0.04)
    error = np.array([0.0, 0.05, -0.05])
    assert compute_metrics(make_trace(error), 0.02).max_overshoot == 0.0


def test_saturation_count() -> None:
    error = np.array([0.02, 0.0, 0.03, -0.001])
    metrics = compute_metrics(make_trace(error, soc_true=0.99), 0.02)
    assert metrics.saturation_count == 2


def test_compute_metrics_errors() -> None:
    with pytest.raises(InputError, match="non-empty"):
        compute_metrics(make_trace(np.zeros(0)), 0.02)
    trace = make_trace(np.zeros(5), soc_true=math.nan)
    with pytest.raises(InputError, match="no finite true soc"):
        compute_metrics(trace, 0.02)


def test_exit_status() -> None:
    ok = make_result("xkf", None, None)
    failed = make_result("ekf", None, 3)
    assert exit_status({"xkf": ok}) == 0
    assert exit_status({"xkf": ok, "ekf": failed}) == 3
    assert exit_status({"ekf": failed}) == 2


def test_write_metrics_csv(tmp_path: Path) -> None:
    rows = [
        ("xkf", make_result("xkf", RunMetrics(0.1, 0.01, None, 0.0, 0), None)),
        ("nlo", make_result("nlo", RunMetrics(0.2, 0.005, 12.0, 0.03, 1), None)),
        ("ekf", make_result("ekf", None, 0)),
    ]
    path = tmp_path / "metrics.csv"
    write_metrics_csv(rows, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(METRICS_COLUMNS)
    assert lines[3] == "ekf,,,,,,0"
    frame = pd.read_csv(path)
    assert frame["filter"].tolist() == ["xkf", "nlo", "ekf"]
    assert math.isnan(frame["convergence_time_s"][0])
    assert frame["convergence_time_s"][1] == 12.0
    assert frame["saturation_count"][1] == 1
    assert math.isnan(frame["failed_at"][0])


def test_divergence_onset() -> None:
    soc_true = np.linspace(0.4, 0.1, 300)
    matched = np.full(300, 0.002)
    mismatched = matched.copy()
    mismatched[200:] = 0.02
    # a short excursion does not count
    mismatched[100:110] = 0.05
    assert divergence_onset(soc_true, matched, mismatched) == soc_true[200]
    assert divergence_onset(soc_true, matched, matched) is None
    assert divergence_onset(soc_true[:30], matched[:30], mismatched[:30]) is None
