"""
线性中介模型的误差相关 ρ 敏感性分析

    NIE(ρ) = β2 · (σ1/σ2) · (ρ̃ − ρ·√((1 − ρ̃²)/(1 − ρ²)))
    NDE(ρ) = β1 − NIE(ρ)
"""
import math
from dataclasses import dataclass
from typing import Tuple

import pandas as pd
from loguru import logger

from src.estimators.mediation import MediationFit
from src.sensitivity.copula import symmetric_grid
from src.utils.errors import DataError, DomainError


@dataclass(frozen=True)
class RhoGridResult:
    """对称 ρ 网格上的 (ρ, NIE, NDE)"""
    rhos: Tuple[float, ...]
    nie: Tuple[float, ...]
    nde: Tuple[float, ...]
    rho_max: float
    n_points: int
    rho_tilde: float
    total_effect: float

    @property
    def nie_bounds(self) -> Tuple[float, float]:
        return min(self.nie), max(self.nie)

    @property
    def nde_bounds(self) -> Tuple[float, float]:
        return min(self.nde), max(self.nde)

    def at_zero(self) -> Tuple[float, float]:
        """ρ = 0 行的 (NIE, NDE)，即未做敏感性调整的结果"""
        index = self.rhos.index(0.0)
        return self.nie[index], self.nde[index]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"rho": self.rhos, "nde": self.nde, "nie": self.nie})


def _check(fit: MediationFit, rho: float) -> None:
    if not math.isfinite(rho) or abs(rho) >= 1:
        raise DomainError(f"rho must lie in (-1, 1), got {rho}")
    if fit.sigma2 <= 0:
        raise DataError("degenerate mediator: residual sd of the mediator model is 0")


def acme_given_rho(fit: MediationFit, rho: float) -> float:
    """
    给定中介与结果误差相关系数 ρ 时的平均中介效应

    Args:
        fit: 中介回归结果
        rho: 误差相关系数，(-1, 1)

    Returns:
        NIE(ρ)；ρ = ρ̃ 时恰为0
    """
    _check(fit, rho)
    root = math.sqrt((1.0 - fit.rho_tilde ** 2) / (1.0 - rho * rho))
    return fit.beta2 * (fit.sigma1 / fit.sigma2) * (fit.rho_tilde - rho * root)


def nde_given_rho(fit: MediationFit, rho: float) -> float:
    """NDE(ρ) = β1 − NIE(ρ)"""
    return fit.beta1 - acme_given_rho(fit, rho)


def mediation_bounds(fit: MediationFit, rho_max: float = 0.9, n_points: int = 19) -> RhoGridResult:
    """
    在 [−ρ_max, ρ_max] 上计算NIE与NDE曲线及其范围

    Args:
        fit: 中介回归结果
        rho_max: 网格上限，(0, 1)
        n_points: 奇数点数（>= 3，保证 ρ = 0 在网格上）

    Returns:
        网格结果
    """
    grid = symmetric_grid(rho_max, n_points)
    nie = [acme_given_rho(fit, float(rho)) for rho in grid]
    nde = [fit.beta1 - value for value in nie]
    result = RhoGridResult(
        rhos=tuple(float(r) for r in grid),
        nie=tuple(nie),
        nde=tuple(nde),
        rho_max=rho_max,
        n_points=n_points,
        rho_tilde=fit.rho_tilde,
        total_effect=fit.beta1,
    )
    lo_nie, hi_nie = result.nie_bounds
    lo_nde, hi_nde = result.nde_bounds
    logger.info(
        f"中介敏感性: ρ ∈ [-{rho_max}, {rho_max}] ({n_points} 点), "
        f"NIE ∈ [{lo_nie:.3f}, {hi_nie:.3f}], NDE ∈ [{lo_nde:.3f}, {hi_nde:.3f}]"
    )
    return result
