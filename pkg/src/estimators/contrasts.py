"""
均值差与Wald工具变量估计
"""
import math
from typing import NamedTuple, Tuple

import numpy as np
from loguru import logger

from src.data.table import DataTable
from src.utils.errors import DataError, WeakInstrumentError

# 第一阶段对比的绝对值低于该阈值时拒绝估计
FIRST_STAGE_TOLERANCE = 1e-6


class Contrast(NamedTuple):
    """均值差估计值及其Welch标准误"""
    estimate: float
    std_error: float


def split_arms(data: DataTable, binary: str, values: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    按二值列把另一列拆成 (取1组, 取0组)

    Raises:
        DataError: 二值列不是0/1或某一组为空
    """
    flag = data.binary_column(binary)
    target = data.column(values)
    arm1 = target[flag == 1.0]
    arm0 = target[flag == 0.0]
    if arm1.size == 0 or arm0.size == 0:
        raise DataError(f"degenerate arm: '{binary}' has {arm1.size} ones and {arm0.size} zeros")
    return arm1, arm0


def _arm_variance(values: np.ndarray) -> float:
    return float(np.var(values, ddof=1)) if values.size > 1 else 0.0


def diff_in_means(data: DataTable, treatment: str, outcome: str) -> Contrast:
    """
    未调整的处理组与对照组均值差

    Args:
        data: 数据表
        treatment: 二值处理列
        outcome: 结果列

    Returns:
        (估计值, Welch标准误)
    """
    treated, control = split_arms(data, treatment, outcome)
    estimate = float(np.mean(treated) - np.mean(control))
    se = math.sqrt(_arm_variance(treated) / treated.size + _arm_variance(control) / control.size)
    logger.info(f"均值差 {outcome} by {treatment}: {estimate:.4f} (SE {se:.4f}, n1={treated.size}, n0={control.size})")
    return Contrast(estimate=estimate, std_error=se)


def wald_iv(data: DataTable, instrument: str, treatment: str, outcome: str) -> float:
    """
    Wald比值估计：结果的简约式对比除以处理的第一阶段对比

    Args:
        data: 数据表
        instrument: 二值工具变量列
        treatment: 处理列
        outcome: 结果列

    Returns:
        Wald估计值

    Raises:
        WeakInstrumentError: 第一阶段对比的绝对值小于1e-6
    """
    y1, y0 = split_arms(data, instrument, outcome)
    a1, a0 = split_arms(data, instrument, treatment)
    first_stage = float(np.mean(a1) - np.mean(a0))
    if abs(first_stage) < FIRST_STAGE_TOLERANCE:
        raise WeakInstrumentError(f"weak/zero first stage: contrast {first_stage:.3g} on '{treatment}'")
    reduced_form = float(np.mean(y1) - np.mean(y0))
    estimate = reduced_form / first_stage
    logger.info(f"Wald估计 {outcome} ~ {treatment} | {instrument}: {estimate:.4f} (第一阶段 {first_stage:.4f})")
    return estimate
