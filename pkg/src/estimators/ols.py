"""
普通最小二乘（列主元QR分解）
"""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
from loguru import logger
from scipy import linalg

from src.data.table import DataTable
from src.utils.errors import DataError, RankDeficiencyError

INTERCEPT = "(Intercept)"

# 奇异值比低于该阈值视为列不满秩
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class OlsFit:
    """回归结果，系数、标准误与t统计量均按回归量名索引（含截距）"""
    outcome: str
    regressors: List[str]
    coefficients: Dict[str, float]
    std_errors: Dict[str, float]
    t_values: Dict[str, float]
    residual_sd: float
    df: int
    r2: float
    n: int
    residuals: np.ndarray = field(repr=False)

    def _check(self, name: str) -> None:
        if name not in self.coefficients:
            raise DataError(f"'{name}' is not a regressor of this fit")

    def coefficient(self, name: str) -> float:
        self._check(name)
        return self.coefficients[name]

    def std_error(self, name: str) -> float:
        self._check(name)
        return self.std_errors[name]

    def t_value(self, name: str) -> float:
        self._check(name)
        return self.t_values[name]

    def partial_r2(self, name: str) -> float:
        """回归量与结果的偏R²：t² / (t² + df)"""
        t = self.t_value(name)
        if np.isinf(t):
            return 1.0
        return float(t * t / (t * t + self.df))


def _design(data: DataTable, regressors: Sequence[str]) -> np.ndarray:
    columns = [np.ones(data.n)] + [data.column(name) for name in regressors]
    return np.column_stack(columns)


def ols(data: DataTable, outcome: str, regressors: Sequence[str]) -> OlsFit:
    """
    带截距的最小二乘拟合

    Args:
        data: 数据表
        outcome: 结果列
        regressors: 回归量列（不含截距）

    Returns:
        拟合结果

    Raises:
        RankDeficiencyError: 设计矩阵不满秩，指出一个线性相关的列
        DataError: 残差自由度不为正
    """
    regressors = list(regressors)
    if len(set(regressors)) != len(regressors):
        raise DataError("regressors must be distinct")
    if outcome in regressors:
        raise DataError(f"outcome '{outcome}' cannot also be a regressor")

    names = [INTERCEPT] + regressors
    y = data.column(outcome)
    x = _design(data, regressors)
    n, p = x.shape
    df = n - p
    if df <= 0:
        raise DataError(f"residual degrees of freedom must be > 0 (n={n}, parameters={p})")

    q, r, pivot = linalg.qr(x, mode="economic", pivoting=True)
    singular = linalg.svdvals(r)
    if singular[0] == 0.0 or singular[-1] / singular[0] < RANK_TOLERANCE:
        diag = np.abs(np.diag(r))
        rank = int(np.sum(diag > RANK_TOLERANCE * diag[0])) if diag[0] > 0 else 0
        dependent = names[int(max(pivot[rank:]))] if rank < p else names[int(pivot[-1])]
        raise RankDeficiencyError(dependent)

    beta_pivoted = linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(p)
    beta[pivot] = beta_pivoted

    r_inv = linalg.solve_triangular(r, np.eye(p))
    xtx_inv = np.empty((p, p))
    xtx_inv[np.ix_(pivot, pivot)] = r_inv @ r_inv.T

    residuals = y - x @ beta
    rss = float(residuals @ residuals)
    sigma2 = rss / df
    se = np.sqrt(np.clip(np.diag(xtx_inv), 0.0, None) * sigma2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.where(beta == 0, 0.0, np.sign(beta) * np.inf))

    centered = y - y.mean()
    tss = float(centered @ centered)
    r2 = 1.0 - rss / tss if tss > 0 else 0.0

    residuals.setflags(write=False)
    fit = OlsFit(
        outcome=outcome,
        regressors=regressors,
        coefficients={name: float(b) for name, b in zip(names, beta)},
        std_errors={name: float(s) for name, s in zip(names, se)},
        t_values={name: float(v) for name, v in zip(names, t)},
        residual_sd=float(np.sqrt(sigma2)),
        df=df,
        r2=float(r2),
        n=n,
        residuals=residuals,
    )
    logger.debug(f"OLS {outcome} ~ {' + '.join(regressors) or '1'}: n={n}, df={df}, R²={fit.r2:.4f}")
    return fit
