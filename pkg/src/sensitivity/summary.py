"""
基于汇总统计量的敏感性分析：E值与无假设界
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from loguru import logger

from src.data.table import DataTable
from src.utils.errors import DataError, DomainError

# 标准化均值差到风险比的近似换算系数
SMD_TO_LOG_RR = 0.91
SMD_CI_FACTOR = 1.78

ATE_BOUND_WIDTH = 1.0


@dataclass(frozen=True)
class RiskSummary:
    """风险比点估计及可选的置信限"""
    rr_point: float
    rr_lower: Optional[float] = None
    rr_upper: Optional[float] = None

    def __post_init__(self):
        for label, value in (("rr_point", self.rr_point), ("rr_lower", self.rr_lower), ("rr_upper", self.rr_upper)):
            if value is not None and (not math.isfinite(value) or value <= 0):
                raise DomainError(f"{label} must be a finite positive risk ratio, got {value}")
        if (self.rr_lower is None) != (self.rr_upper is None):
            raise DomainError("give both confidence limits or neither")
        if self.rr_lower is not None and not self.rr_lower <= self.rr_point <= self.rr_upper:
            raise DomainError(
                f"confidence limits must bracket the point estimate: {self.rr_lower} <= {self.rr_point} <= {self.rr_upper}"
            )


@dataclass(frozen=True)
class AteBounds:
    """二值结果的无假设界"""
    y1_lower: float
    y1_upper: float
    y0_lower: float
    y0_upper: float

    @property
    def ate_lower(self) -> float:
        return self.y1_lower - self.y0_upper

    @property
    def ate_upper(self) -> float:
        return self.ate_lower + self.ate_width

    @property
    def ate_width(self) -> float:
        """二值结果下两臂界宽为 1−p 与 p，合计恒为1"""
        return ATE_BOUND_WIDTH


def evalue_point(rr: float) -> float:
    """
    风险比的E值：RR + √(RR·(RR−1))，RR<1时取倒数

    Args:
        rr: 风险比（> 0）

    Returns:
        E值（>= 1）
    """
    if not math.isfinite(rr) or rr <= 0:
        raise DomainError(f"risk ratio must be finite and > 0, got {rr}")
    if not math.isfinite(1.0 / rr):
        raise DomainError(f"risk ratio {rr} has no finite reciprocal")
    big = _reciprocal_representative(rr)
    return big + math.sqrt(big) * math.sqrt(big - 1.0)


def _reciprocal_representative(rr: float) -> float:
    """
    rr 与 1/rr 共用的代表值（>= 1）

    反复取倒数直到进入循环，返回循环中的最大值；rr 与浮点数 1/rr 落在同一循环上，
    因此两个方向的E值逐位相同。
    """
    orbit = []
    value = rr
    while value not in orbit:
        orbit.append(value)
        value = 1.0 / value
    return max(orbit[orbit.index(value):])


def evalue_ci(summary: RiskSummary) -> Tuple[float, float]:
    """
    点估计与置信限的E值；置信区间包含1时置信限E值为1

    Returns:
        (点估计E值, 置信限E值)
    """
    if summary.rr_lower is None or summary.rr_upper is None:
        raise DomainError("confidence limits are required for the E-value of the interval")
    e_point = evalue_point(summary.rr_point)
    if summary.rr_lower > 1.0:
        e_ci = evalue_point(summary.rr_lower)
    elif summary.rr_upper < 1.0:
        e_ci = evalue_point(summary.rr_upper)
    else:
        e_ci = 1.0
    return e_point, e_ci


def rr_from_smd(d: float) -> float:
    """标准化均值差换算为近似风险比 exp(0.91·d)"""
    if not math.isfinite(d):
        raise DomainError(f"standardized mean difference must be finite, got {d}")
    return math.exp(SMD_TO_LOG_RR * d)


def evalue_smd(d: float, se: float) -> Tuple[float, float]:
    """
    连续结果的E值

    Args:
        d: 标准化均值差
        se: d的标准误

    Returns:
        (点估计E值, 置信限E值)
    """
    if not math.isfinite(se) or se < 0:
        raise DomainError(f"standard error must be finite and >= 0, got {se}")
    summary = RiskSummary(
        rr_point=rr_from_smd(d),
        rr_lower=math.exp(SMD_TO_LOG_RR * d - SMD_CI_FACTOR * se),
        rr_upper=math.exp(SMD_TO_LOG_RR * d + SMD_CI_FACTOR * se),
    )
    return evalue_ci(summary)


def bounding_factor(rr_eu: float, rr_ud: float) -> float:
    """混杂强度对 (RR_EU, RR_UD) 所能解释的最大风险比"""
    if rr_eu < 1 or rr_ud < 1:
        raise DomainError("confounder risk ratios must be >= 1")
    return rr_eu * rr_ud / (rr_eu + rr_ud - 1.0)


def _check_probability(label: str, value: float, closed: bool) -> None:
    ok = 0.0 <= value <= 1.0 if closed else 0.0 < value < 1.0
    if not math.isfinite(value) or not ok:
        interval = "[0, 1]" if closed else "(0, 1)"
        raise DomainError(f"{label} must lie in {interval}, got {value}")


def manski_bounds(p_treat: float, p_y1_t1: float, p_y1_t0: float) -> AteBounds:
    """
    二值结果的无假设平均处理效应界

    Args:
        p_treat: P(A=1)
        p_y1_t1: P(Y=1 | A=1)
        p_y1_t0: P(Y=1 | A=0)

    Returns:
        E[Y(1)]、E[Y(0)] 与ATE的上下界
    """
    _check_probability("p_treat", p_treat, closed=False)
    _check_probability("p_y1_t1", p_y1_t1, closed=True)
    _check_probability("p_y1_t0", p_y1_t0, closed=True)

    y1_lower = p_y1_t1 * p_treat
    y0_lower = p_y1_t0 * (1.0 - p_treat)
    return AteBounds(
        y1_lower=y1_lower,
        y1_upper=y1_lower + (1.0 - p_treat),
        y0_lower=y0_lower,
        y0_upper=y0_lower + p_treat,
    )


def _bounds_for(treatment: np.ndarray, outcome: np.ndarray) -> AteBounds:
    treated = treatment == 1.0
    if treated.all() or not treated.any():
        raise DataError("degenerate arm: bounds need both treated and control units")
    return manski_bounds(
        float(np.mean(treated)),
        float(np.mean(outcome[treated])),
        float(np.mean(outcome[~treated])),
    )


def manski_bounds_from_table(
    data: DataTable,
    treatment: str,
    outcome: str,
    covariate: Optional[str] = None,
) -> AteBounds:
    """
    从数据计算无假设界；给定离散协变量时逐层计算后按层权重平均

    Args:
        data: 数据表
        treatment: 二值处理列
        outcome: 二值结果列
        covariate: 可选的离散协变量列

    Returns:
        无假设界
    """
    a = data.binary_column(treatment)
    y = data.binary_column(outcome)
    if covariate is None:
        return _bounds_for(a, y)

    x = data.column(covariate)
    levels, counts = np.unique(x, return_counts=True)
    weights = counts / counts.sum()
    strata = []
    for level in levels:
        mask = x == level
        try:
            strata.append(_bounds_for(a[mask], y[mask]))
        except DataError as e:
            raise DataError(f"stratum {covariate}={level:g}: {e}") from e

    def _average(attribute: str) -> float:
        return math.fsum(w * getattr(b, attribute) for w, b in zip(weights, strata))

    bounds = AteBounds(
        y1_lower=_average("y1_lower"),
        y1_upper=_average("y1_upper"),
        y0_lower=_average("y0_lower"),
        y0_upper=_average("y0_upper"),
    )
    logger.info(f"分层无假设界: {len(levels)} 层, ATE in [{bounds.ate_lower:.4f}, {bounds.ate_upper:.4f}]")
    return bounds
