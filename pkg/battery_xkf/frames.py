from __future__ import annotations

import collections
import hashlib
from pathlib import Path
from typing import Any
from typing import ClassVar
from typing import TYPE_CHECKING
from typing import TypeVar

import numpy as np
import pandas as pd

from battery_xkf._typing import FloatArray
from battery_xkf.errors import InputError

if TYPE_CHECKING:
    from collections.abc import Sequence

STREAM_HEADER = "# stream_sha256="

FrameT = TypeVar("FrameT", bound="TimeSeriesFrame")


class TimeSeriesFrame:
    """A pandas DataFrame with a fixed column contract and a clean RangeIndex."""

    columns: ClassVar[tuple[str, ...]] = ()
    # columns that may be missing on read and are then filled with NaN
    optional: ClassVar[tuple[str, ...]] = ()

    def __init__(self, dataframe: pd.DataFrame) -> None:
        self._validate_columns(dataframe.columns)  # type: ignore[arg-type]
        dataframe = dataframe.loc[:, list(self.columns)]
        if (
            isinstance(dataframe.index, pd.RangeIndex)
            and dataframe.index.start == 0  # type: ignore[comparison-overlap]
            and dataframe.index.step == 1  # type: ignore[comparison-overlap]
            and dataframe.index.stop == len(dataframe)  # type: ignore[comparison-overlap]
        ):
            self._dataframe = dataframe
        else:
            self._dataframe = dataframe.reset_index(drop=True)

    def _validate_columns(self, columns: Sequence[str]) -> None:
        counter = collections.Counter(columns)
        for col, count in counter.items():
            if count > 1:
                raise InputError(f"Expected unique column names, got {col} {count} time(s)")
        missing = [col for col in self.columns if col not in counter]
        if missing:
            raise InputError(
                f"Expected columns {list(self.columns)}, missing {missing}"
            )

    @property
    def dataframe(self) -> pd.DataFrame:
        return self._dataframe

    def __len__(self) -> int:
        return len(self._dataframe)

    def column(self, name: str) -> FloatArray:
        return self._dataframe[name].to_numpy(dtype=np.float64)

    @classmethod
    def from_columns(cls: type[FrameT], **columns: Any) -> FrameT:
        return cls(pd.DataFrame(columns))

    @classmethod
    def read_csv(cls: type[FrameT], path: str | Path) -> FrameT:
        dataframe = pd.read_csv(path, comment="#", float_precision="round_trip")
        for col in cls.optional:
            if col not in dataframe.columns:
                dataframe[col] = np.nan
        return cls(dataframe)

    def to_csv(self, path: str | Path, *, header_line: str | None = None) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fd:
            if header_line is not None:
                fd.write(header_line + "\n")
            self._dataframe.to_csv(fd, index=False, lineterminator="\n")


def stream_checksum(*arrays: np.ndarray[Any, Any]) -> str:
    digest = hashlib.sha256()
    for array in arrays:
        digest.update(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return digest.hexdigest()


def read_stream_checksum(path: str | Path) -> str:
    with Path(path).open(encoding="utf-8") as fd:
        first = fd.readline().rstrip("\n")
    if not first.startswith(STREAM_HEADER):
        raise InputError(f"{path}: missing stream checksum header")
    return first[len(STREAM_HEADER) :]
