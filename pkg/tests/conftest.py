from __future__ import annotations

from typing import Any

from battery_xkf.estimators import FILTER_NAMES


def pytest_generate_tests(metafunc: Any) -> None:
    if "filter_name" in metafunc.fixturenames:
        metafunc.parametrize("filter_name", list(FILTER_NAMES))
