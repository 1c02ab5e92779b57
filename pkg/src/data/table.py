"""
列式数值数据表
"""
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Dict, List, Mapping, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from src.utils.errors import DataError


@dataclass(frozen=True)
class DataTable:
    """带列名的等长float64列集合，构造后不可变"""
    columns: Mapping[str, np.ndarray]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        frozen: Dict[str, np.ndarray] = {}
        lengths = set()
        for name, values in self.columns.items():
            if not name:
                raise DataError("column names must be non-empty")
            array = np.array(values, dtype=np.float64, copy=True)
            if array.ndim != 1:
                raise DataError(f"column '{name}' is not one-dimensional")
            if not np.all(np.isfinite(array)):
                raise DataError(f"column '{name}' contains non-finite values")
            array.setflags(write=False)
            frozen[name] = array
            lengths.add(array.shape[0])
        if len(lengths) > 1:
            raise DataError(f"columns have unequal lengths: {sorted(lengths)}")
        object.__setattr__(self, "columns", MappingProxyType(frozen))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    @property
    def names(self) -> List[str]:
        return list(self.columns.keys())

    @property
    def n(self) -> int:
        for values in self.columns.values():
            return int(values.shape[0])
        return 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.column(name)

    def __contains__(self, name: object) -> bool:
        return name in self.columns

    def column(self, name: str) -> np.ndarray:
        """按名称取列，缺失时抛出DataError"""
        if name not in self.columns:
            raise DataError(f"missing column '{name}' (available: {', '.join(self.names)})")
        return self.columns[name]

    def binary_column(self, name: str) -> np.ndarray:
        """取一列并确认取值只有0和1"""
        values = self.column(name)
        if not np.all((values == 0.0) | (values == 1.0)):
            raise DataError(f"column '{name}' is not binary {{0,1}}")
        return values

    def with_column(self, name: str, values: Union[np.ndarray, Sequence[float]]) -> "DataTable":
        columns = dict(self.columns)
        columns[name] = np.asarray(values, dtype=np.float64)
        return DataTable(columns, self.metadata)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({name: np.asarray(values) for name, values in self.columns.items()})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "DataTable":
        columns = {}
        for name in frame.columns:
            try:
                columns[str(name)] = pd.to_numeric(frame[name], errors="raise").to_numpy(dtype=np.float64)
            except (ValueError, TypeError) as e:
                raise DataError(f"column '{name}' is not numeric: {e}") from e
        return cls(columns)

    @classmethod
    def read_csv(cls, path: Path) -> "DataTable":
        """
        读取CSV数据集

        Args:
            path: CSV文件路径，以#开头的行视为注释

        Returns:
            数据表
        """
        path = Path(path)
        if not path.exists():
            raise DataError(f"data file not found: {path}")
        try:
            frame = pd.read_csv(path, comment="#", float_precision="round_trip")
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise DataError(f"cannot parse CSV {path}: {e}") from e
        logger.info(f"读取数据: {path} ({len(frame)} 行, {len(frame.columns)} 列)")
        return cls.from_frame(frame)
