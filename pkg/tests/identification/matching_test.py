from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import pytest

from battery_xkf.errors import InputError
from battery_xkf.identification import match_noise_covariances
from battery_xkf.identification import MIN_MATCHING_SAMPLES

if TYPE_CHECKING:
    from battery_xkf._typing import FloatArray

_H = np.array([-1.0, -1.0, 0.5])


def synthetic_innovations(
    n: int, p_soc: float, r: float, seed: int = 0
) -> tuple[FloatArray, FloatArray, FloatArray]:
    p = np.diag([1e-6, 1e-6, p_soc])
    variance = float(_H @ p @ _H) + r
    rng = np.random.default_rng(seed)
    innovations = rng.normal(scale=math.sqrt(variance), size=n)
    return innovations, np.tile(_H, (n, 1)), np.tile(p, (n, 1, 1))


def test_consistent_guess_is_a_fixed_point() -> None:
    innovations, h, p = synthetic_innovations(10_000, 1e-3, 0.0016)
    result = match_noise_covariances(innovations, h, p, 0.0016, np.eye(3) * 1e-4)
    assert result.converged
    assert result.iterations == 1
    assert result.r_scale == 1.0
    assert result.q_scale == 1.0
    np.testing.assert_array_equal(result.q_cov, np.eye(3) * 1e-4)


def test_recovers_measurement_noise() -> None:
    innovations, h, p = synthetic_innovations(10_000, 1e-5, 0.04**2, seed=1)
    result = match_noise_covariances(innovations, h, p, 1e-4, np.eye(3) * 1e-4)
    assert result.converged
    assert 1 < result.iterations <= 20
    assert math.sqrt(result.r_cov) == pytest.approx(0.04, abs=0.005)
    assert result.r_scale == pytest.approx(result.r_cov / 1e-4)


def test_unusable_rows_are_skipped() -> None:
    innovations, h, p = synthetic_innovations(400, 1e-3, 0.0016, seed=2)
    innovations[:50] = np.nan
    p[50:60] = np.nan
    result = match_noise_covariances(innovations, h, p, 0.0016, np.eye(3) * 1e-4)
    assert np.isfinite(result.r_cov)


def test_iteration_cap() -> None:
    innovations, h, p = synthetic_innovations(1_000, 1e-5, 0.04**2, seed=3)
    result = match_noise_covariances(
        innovations, h, p, 1e-4, np.eye(3) * 1e-4, max_iterations=1
    )
    assert not result.converged
    assert result.iterations == 1


def test_too_few_samples() -> None:
    innovations, h, p = synthetic_innovations(50, 1e-3, 0.0016)
    with pytest.raises(InputError, match=f"at least {MIN_MATCHING_SAMPLES}"):
        match_noise_covariances(innovations, h, p, 0.0016, np.eye(3))


@pytest.mark.parametrize(
    ("r_guess", "q_guess", "match"),
    [
        (0.0, np.eye(3), "r_guess > 0"),
        (float("nan"), np.eye(3), "r_guess > 0"),
        (0.0016, np.zeros((3, 3)), "positive trace"),
    ],
)
def test_invalid_guesses(
    r_guess: float, q_guess: FloatArray, match: str
) -> None:
    innovations, h, p = synthetic_innovations(200, 1e-3, 0.0016)
    with pytest.raises(InputError, match=match):
        match_noise_covariances(innovations, h, p, r_guess, q_guess)


def test_shape_mismatch() -> None:
    innovations, h, p = synthetic_innovations(200, 1e-3, 0.0016)
    with pytest.raises(InputError, match="h_trace"):
        match_noise_covariances(innovations, h[:-1], p, 0.0016, np.eye(3))
