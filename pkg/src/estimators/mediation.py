"""
线性中介模型的三组回归
"""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from loguru import logger

from src.data.table import DataTable
from src.estimators.ols import ols
from src.utils.errors import DataError


@dataclass(frozen=True)
class MediationFit:
    """
    中介敏感性分析所需的回归量

    beta1: Y ~ A (+ 协变量) 中处理的系数（总效应）
    beta2: M ~ A (+ 协变量) 中处理的系数
    beta3: Y ~ A + M (+ 协变量) 中处理的系数（直接效应）
    gamma: 同一回归中中介的系数
    sigma1, sigma2: 前两组回归的残差标准差
    rho_tilde: 前两组回归残差的样本相关系数
    """
    beta1: float
    beta2: float
    beta3: float
    gamma: float
    sigma1: float
    sigma2: float
    rho_tilde: float
    n: int
    treatment: str = "A"
    mediator: str = "M"
    outcome: str = "Y"
    covariates: Tuple[str, ...] = ()


def _residual_correlation(e1: np.ndarray, e2: np.ndarray) -> float:
    norm1 = float(np.sqrt(e1 @ e1))
    norm2 = float(np.sqrt(e2 @ e2))
    if norm1 == 0.0 or norm2 == 0.0:
        return 0.0
    return float(np.clip((e1 @ e2) / (norm1 * norm2), -1.0, 1.0))


def fit_mediation(
    data: DataTable,
    treatment: str,
    mediator: str,
    outcome: str,
    covariates: Sequence[str] = (),
) -> MediationFit:
    """
    拟合 Y~A、M~A、Y~A+M 三个回归（可选加入相同的观测协变量）

    Args:
        data: 数据表
        treatment: 二值处理列
        mediator: 中介列
        outcome: 结果列
        covariates: 三组回归共同调整的观测协变量

    Returns:
        中介回归结果
    """
    data.binary_column(treatment)
    covariates = tuple(covariates)
    overlap = {treatment, mediator, outcome} & set(covariates)
    if overlap:
        raise DataError(f"covariates overlap the mediation variables: {sorted(overlap)}")

    total = ols(data, outcome, [treatment, *covariates])
    mediator_model = ols(data, mediator, [treatment, *covariates])
    direct = ols(data, outcome, [treatment, mediator, *covariates])

    fit = MediationFit(
        beta1=total.coefficient(treatment),
        beta2=mediator_model.coefficient(treatment),
        beta3=direct.coefficient(treatment),
        gamma=direct.coefficient(mediator),
        sigma1=total.residual_sd,
        sigma2=mediator_model.residual_sd,
        rho_tilde=_residual_correlation(total.residuals, mediator_model.residuals),
        n=data.n,
        treatment=treatment,
        mediator=mediator,
        outcome=outcome,
        covariates=covariates,
    )
    logger.info(
        f"中介回归: beta1={fit.beta1:.4f}, beta2={fit.beta2:.4f}, beta3={fit.beta3:.4f}, "
        f"gamma={fit.gamma:.4f}, rho~={fit.rho_tilde:.4f}"
    )
    return fit
