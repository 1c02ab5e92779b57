"""
高斯copula ρ 敏感性分析（二值处理、连续结果）

处理由标准正态潜变量 η 在 z_c = Φ⁻¹(1−p) 处截断产生，结果的结构残差 ε 与 η 的相关系数为 ρ：

    bias(ρ) = ρ · σ_ε · φ(z_c) / (p(1−p)),   τ(ρ) = τ_unadj − bias(ρ)

naive 模式取 σ_ε = s；exact 模式按截断正态方差修正 σ_ε，使臂内合并方差等于 s²。
"""
import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import norm

from src.data.table import DataTable
from src.estimators.contrasts import diff_in_means, split_arms
from src.utils.errors import DataError, DomainError

CopulaMode = Literal["naive", "exact"]


@dataclass(frozen=True)
class CopulaSummary:
    """τ_unadj：未调整均值差；p：处理比例；s：臂内合并标准差（分母为n）"""
    tau_unadj: float
    p: float
    s: float
    n: int

    def __post_init__(self):
        if not math.isfinite(self.tau_unadj):
            raise DataError("unadjusted estimate must be finite")
        if not 0 < self.p < 1:
            raise DomainError(f"treated fraction must lie in (0, 1), got {self.p}")
        if not math.isfinite(self.s) or self.s <= 0:
            raise DataError(f"degenerate outcome: pooled within-arm sd is {self.s}")

    @property
    def z_c(self) -> float:
        return float(norm.ppf(1.0 - self.p))

    @property
    def density(self) -> float:
        """φ(z_c)"""
        return float(norm.pdf(self.z_c))

    @property
    def slope(self) -> float:
        """φ(z_c) / (p(1−p))"""
        return self.density / (self.p * (1.0 - self.p))

    @property
    def variance_shrink(self) -> float:
        """p(v1−1) + (1−p)(v0−1)，等于 −φ(z_c)²/(p(1−p))"""
        z, phi, p = self.z_c, self.density, self.p
        lam1 = phi / p
        lam0 = -phi / (1.0 - p)
        v1 = 1.0 + z * lam1 - lam1 ** 2
        v0 = 1.0 + z * lam0 - lam0 ** 2
        return p * (v1 - 1.0) + (1.0 - p) * (v0 - 1.0)


@dataclass(frozen=True)
class RhoCurve:
    """ρ 网格上的调整后ACE"""
    mode: CopulaMode
    rhos: Tuple[float, ...]
    aces: Tuple[float, ...]
    rho_star: Optional[float]
    bounds: Tuple[float, float]

    def to_frame(self) -> pd.DataFrame:
        """(rho, ace) 表，ρ = 0 的未调整行排在第一行，其余按 ρ 递增"""
        frame = pd.DataFrame({"rho": self.rhos, "ace": self.aces})
        origin = frame["rho"] == 0.0
        return pd.concat([frame[origin], frame[~origin]], ignore_index=True)


def _check_mode(mode: str) -> None:
    if mode not in ("naive", "exact"):
        raise DomainError(f"mode must be 'naive' or 'exact', got '{mode}'")


def summarize_for_copula(data: DataTable, treatment: str, outcome: str) -> CopulaSummary:
    """
    计算copula分析所需的汇总量

    Args:
        data: 数据表
        treatment: 二值处理列
        outcome: 结果列

    Returns:
        汇总量
    """
    treated, control = split_arms(data, treatment, outcome)
    tau = diff_in_means(data, treatment, outcome).estimate
    n = treated.size + control.size
    within = float(np.sum((treated - treated.mean()) ** 2) + np.sum((control - control.mean()) ** 2))
    s = math.sqrt(within / n)
    if s == 0:
        raise DataError(f"degenerate outcome: '{outcome}' is constant within both arms")
    return CopulaSummary(tau_unadj=tau, p=treated.size / n, s=s, n=n)


def _sigma_eps(summary: CopulaSummary, rho: float, mode: CopulaMode) -> float:
    if mode == "naive":
        return summary.s
    return summary.s / math.sqrt(1.0 + rho * rho * summary.variance_shrink)


def bias_given_rho(summary: CopulaSummary, rho: float, mode: CopulaMode = "exact") -> float:
    """混杂偏倚 bias(ρ)"""
    _check_mode(mode)
    if not math.isfinite(rho) or abs(rho) >= 1:
        raise DomainError(f"rho must lie in (-1, 1), got {rho}")
    return rho * _sigma_eps(summary, rho, mode) * summary.slope


def ace_given_rho(summary: CopulaSummary, rho: float, mode: CopulaMode = "exact") -> float:
    """
    给定copula相关系数ρ时的ACE

    Args:
        summary: 汇总量
        rho: 处理潜变量与结果残差的相关系数
        mode: naive 或 exact

    Returns:
        τ(ρ)，在 ρ 上严格递减
    """
    return summary.tau_unadj - bias_given_rho(summary, rho, mode)


def rho_nullifying(summary: CopulaSummary, mode: CopulaMode = "exact") -> Optional[float]:
    """
    使 τ(ρ*) = 0 的 ρ*

    Returns:
        ρ*；|ρ*| >= 1 时返回 None（区间内无法使效应归零）
    """
    _check_mode(mode)
    naive = summary.tau_unadj * summary.p * (1.0 - summary.p) / (summary.s * summary.density)
    if mode == "naive":
        rho = naive
    else:
        # ρ/√(1 − kρ²) = c 的正根
        k = -summary.variance_shrink
        rho = naive / math.sqrt(1.0 + k * naive * naive)
    if abs(rho) >= 1:
        logger.warning(f"ρ* = {rho:.4f} 超出 (-1, 1)，无法在区间内使效应归零")
        return None
    return rho


def ace_bounds(summary: CopulaSummary, rho_max: float, mode: CopulaMode = "exact") -> Tuple[float, float]:
    """
    ρ ∈ [−ρ_max, ρ_max] 上 τ 的范围

    Returns:
        (τ(ρ_max), τ(−ρ_max))
    """
    if not 0 < rho_max < 1:
        raise DomainError(f"rho_max must lie in (0, 1), got {rho_max}")
    return ace_given_rho(summary, rho_max, mode), ace_given_rho(summary, -rho_max, mode)


def symmetric_grid(rho_max: float, n_points: int) -> np.ndarray:
    """[−ρ_max, ρ_max] 上的对称网格，点数为奇数，中点恰为0"""
    if not 0 < rho_max < 1:
        raise DomainError(f"rho_max must lie in (0, 1), got {rho_max}")
    if n_points < 3 or n_points % 2 == 0:
        raise DomainError(f"n_points must be odd and >= 3, got {n_points}")
    grid = rho_max * np.linspace(-1.0, 1.0, n_points)
    grid[n_points // 2] = 0.0
    return grid


def rho_curve(
    summary: CopulaSummary,
    rho_max: float = 0.95,
    n_points: int = 41,
    mode: CopulaMode = "exact",
) -> RhoCurve:
    """
    在对称网格上计算 τ(ρ) 曲线、ρ* 与ACE界

    Args:
        summary: 汇总量
        rho_max: 网格上限
        n_points: 奇数点数
        mode: naive 或 exact

    Returns:
        敏感性曲线
    """
    _check_mode(mode)
    grid = symmetric_grid(rho_max, n_points)
    aces: List[float] = [ace_given_rho(summary, float(rho), mode) for rho in grid]
    curve = RhoCurve(
        mode=mode,
        rhos=tuple(float(r) for r in grid),
        aces=tuple(aces),
        rho_star=rho_nullifying(summary, mode),
        bounds=ace_bounds(summary, rho_max, mode),
    )
    star = "not nullifiable in range" if curve.rho_star is None else f"{curve.rho_star:.4f}"
    logger.info(f"copula曲线 ({mode}): {n_points} 点, ρ* = {star}, 界 = [{curve.bounds[0]:.4f}, {curve.bounds[1]:.4f}]")
    return curve
