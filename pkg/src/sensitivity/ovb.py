"""
偏R²参数化的遗漏变量偏倚敏感性分析

    |偏倚| = se(τ̂) · √df · √(R²_yu · R²_au / (1 − R²_au))
    调整后估计 = τ̂ − 方向 · |偏倚|
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from src.estimators.ols import OlsFit
from src.utils.errors import DataError, DomainError

RV_CEILING = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class OvbParams:
    """混杂与结果、与处理的偏R²"""
    r2_yu: float
    r2_au: float

    def __post_init__(self):
        for label, value in (("r2_yu", self.r2_yu), ("r2_au", self.r2_au)):
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{label} must be finite and >= 0, got {value}")
        if self.r2_au >= 1:
            raise DomainError(f"r2_au = {self.r2_au} makes the bias formula singular")
        if self.r2_yu >= 1:
            raise DomainError(f"r2_yu must be < 1, got {self.r2_yu}")


@dataclass(frozen=True)
class Marker:
    label: str
    r2_au: float
    r2_yu: float
    adjusted_estimate: float


@dataclass(frozen=True)
class ContourGrid:
    """
    调整后估计的网格

    estimates[i, j] 与 t_values[i, j] 对应 (r2_au_axis[i], r2_yu_axis[j])；
    extreme 为 R²_yu = 1 时各 r2_au 下的最坏情形估计
    """
    treatment: str
    estimate: float
    direction: int
    r2_au_axis: np.ndarray
    r2_yu_axis: np.ndarray
    estimates: np.ndarray
    t_values: np.ndarray
    extreme: np.ndarray
    markers: List[Marker] = field(default_factory=list)

    def has_sign_change(self) -> bool:
        return bool(np.any(np.sign(self.estimates) != np.sign(self.estimate)))

    def to_frame(self) -> pd.DataFrame:
        """长表：r2_au, r2_yu, adjusted_estimate, adjusted_t, kind"""
        au, yu = np.meshgrid(self.r2_au_axis, self.r2_yu_axis, indexing="ij")
        grid = pd.DataFrame({
            "r2_au": au.ravel(),
            "r2_yu": yu.ravel(),
            "adjusted_estimate": self.estimates.ravel(),
            "adjusted_t": self.t_values.ravel(),
            "kind": "grid",
        })
        extreme = pd.DataFrame({
            "r2_au": self.r2_au_axis,
            "r2_yu": 1.0,
            "adjusted_estimate": self.extreme,
            "adjusted_t": np.nan,
            "kind": "extreme",
        })
        markers = pd.DataFrame([
            {
                "r2_au": m.r2_au,
                "r2_yu": m.r2_yu,
                "adjusted_estimate": m.adjusted_estimate,
                "adjusted_t": np.nan,
                "kind": f"marker:{m.label}",
            }
            for m in self.markers
        ], columns=grid.columns)
        return pd.concat([grid, extreme, markers], ignore_index=True)


def _check_direction(direction: int) -> int:
    if direction not in (1, -1):
        raise DomainError(f"direction must be +1 or -1, got {direction}")
    return direction


def _check_df(fit: OlsFit) -> None:
    if fit.df <= 0:
        raise DataError(f"residual degrees of freedom must be > 0, got {fit.df}")


def bias_magnitude(fit: OlsFit, treatment: str, params: OvbParams) -> float:
    """给定偏R²时遗漏变量偏倚的绝对值"""
    _check_df(fit)
    se = fit.std_error(treatment)
    return se * math.sqrt(fit.df) * math.sqrt(params.r2_yu * params.r2_au / (1.0 - params.r2_au))


def adjusted_estimate(fit: OlsFit, treatment: str, params: OvbParams, direction: int = 1) -> float:
    """
    调整遗漏变量后的处理系数

    Args:
        fit: 不含混杂的回归
        treatment: 处理回归量
        params: 混杂强度
        direction: +1 表示偏倚使估计偏大（调整后减小），-1 相反

    Returns:
        调整后估计
    """
    direction = _check_direction(direction)
    return fit.coefficient(treatment) - direction * bias_magnitude(fit, treatment, params)


def adjusted_se(fit: OlsFit, treatment: str, params: OvbParams) -> float:
    """调整后的标准误 se·√((1−R²_yu)/(1−R²_au))·√(df/(df−1))"""
    _check_df(fit)
    if fit.df <= 1:
        raise DataError("adjusted standard error needs df > 1")
    se = fit.std_error(treatment)
    return se * math.sqrt((1.0 - params.r2_yu) / (1.0 - params.r2_au)) * math.sqrt(fit.df / (fit.df - 1))


def adjusted_t(fit: OlsFit, treatment: str, params: OvbParams, direction: int = 1) -> float:
    se = adjusted_se(fit, treatment, params)
    estimate = adjusted_estimate(fit, treatment, params, direction)
    if se == 0:
        return math.copysign(math.inf, estimate) if estimate != 0 else 0.0
    return estimate / se


def robustness_value(fit: OlsFit, treatment: str, q: float = 1.0) -> float:
    """
    稳健值 RV_q：混杂与处理、结果的偏R²相等时，使估计缩小比例q所需的强度

    Args:
        fit: 回归结果
        treatment: 处理回归量
        q: 缩小比例，(0, 1]

    Returns:
        [0, 1) 内的稳健值
    """
    if not 0 < q <= 1:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    _check_df(fit)
    t = fit.t_value(treatment)
    if not math.isfinite(t):
        raise DataError("robustness value is undefined for an infinite t-statistic")
    f = q * abs(t) / math.sqrt(fit.df)
    if f == 0:
        return 0.0
    # ½(√(f⁴+4f²) − f²) 的等价形式 2f / (√(f²+4) + f)，大f时既不相消也不溢出
    rv = 2.0 * f / (math.hypot(f, 2.0) + f)
    # 近乎完美拟合时会舍入到1，截断到1以下的最大浮点数
    return min(rv, RV_CEILING)


def contour_grid(
    fit: OlsFit,
    treatment: str,
    n_points: int,
    r2_max: float,
    direction: Optional[int] = None,
) -> ContourGrid:
    """
    在 [0, r2_max]² 上计算调整后估计与t统计量

    Args:
        fit: 回归结果
        treatment: 处理回归量
        n_points: 每个轴的点数（>= 2）
        r2_max: 轴上限，(0, 1)
        direction: 偏倚方向，缺省为 sign(τ̂)

    Returns:
        网格结果，(0, 0) 处等于 τ̂
    """
    if n_points < 2:
        raise DomainError(f"n_points must be >= 2, got {n_points}")
    if not 0 < r2_max < 1:
        raise DomainError(f"r2_max must lie in (0, 1), got {r2_max}")
    estimate = fit.coefficient(treatment)
    if direction is None:
        direction = -1 if estimate < 0 else 1
    direction = _check_direction(direction)

    axis = np.linspace(0.0, r2_max, n_points)
    estimates = np.empty((n_points, n_points))
    t_values = np.empty((n_points, n_points))
    for i, r2_au in enumerate(axis):
        for j, r2_yu in enumerate(axis):
            params = OvbParams(r2_yu=float(r2_yu), r2_au=float(r2_au))
            estimates[i, j] = adjusted_estimate(fit, treatment, params, direction)
            t_values[i, j] = adjusted_t(fit, treatment, params, direction)

    se_root_df = fit.std_error(treatment) * math.sqrt(fit.df)
    extreme = np.array([estimate - direction * se_root_df * math.sqrt(r2 / (1.0 - r2)) for r2 in axis])

    rv = robustness_value(fit, treatment)
    markers = [
        Marker("unadjusted", 0.0, 0.0, estimate),
        Marker("robustness-value", rv, rv, adjusted_estimate(fit, treatment, OvbParams(rv, rv), direction)),
    ]

    grid = ContourGrid(
        treatment=treatment,
        estimate=estimate,
        direction=direction,
        r2_au_axis=axis,
        r2_yu_axis=axis.copy(),
        estimates=estimates,
        t_values=t_values,
        extreme=extreme,
        markers=markers,
    )
    logger.info(f"OVB网格: {n_points}x{n_points}, r2_max={r2_max}, RV={rv:.4f}, 零等值线={'是' if grid.has_sign_change() else '否'}")
    return grid
