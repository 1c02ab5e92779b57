"""
离散混杂偏倚分解

    τ  = Σ_x Σ_u {E(Y|a1,x,u) − E(Y|a0,x,u)} P(u|x) P(x)
    τ* = Σ_x {E(Y|a1,x) − E(Y|a0,x)} P(x),  E(Y|a,x) = Σ_u E(Y|a,x,u) P(u|x,a)
    偏倚 = τ* − τ

求和一律使用 math.fsum（精确舍入），结果与标签顺序无关。
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from src.data.table import DataTable
from src.utils.errors import DataError, DomainError

Cell = Tuple[Hashable, Hashable, Hashable]

# 概率低于该阈值的格子视为空
POSITIVITY_TOLERANCE = 1e-15
MASS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DiscreteJoint:
    """
    (X, U, A) 的有限联合分布及各格子的条件结果均值

    probabilities: (x, u, a) -> P(x, u, a)
    outcome_means: (x, u, a) -> E[Y | a, x, u]，概率为零的格子可缺省
    """
    probabilities: Mapping[Cell, float]
    outcome_means: Mapping[Cell, float]
    a0: Hashable = 0
    a1: Hashable = 1
    x_labels: Tuple[Hashable, ...] = field(init=False)
    u_labels: Tuple[Hashable, ...] = field(init=False)

    def __post_init__(self):
        if self.a0 == self.a1:
            raise DomainError("treatment levels a0 and a1 must differ")
        probabilities = {tuple(cell): float(p) for cell, p in self.probabilities.items()}
        means = {tuple(cell): float(v) for cell, v in self.outcome_means.items()}

        for cell, p in probabilities.items():
            if len(cell) != 3:
                raise DataError(f"cell {cell} must be an (x, u, a) triple")
            if cell[2] not in (self.a0, self.a1):
                raise DataError(f"cell {cell} has treatment level outside {{{self.a0}, {self.a1}}}")
            if not math.isfinite(p) or p < 0:
                raise DataError(f"probability of cell {cell} must be finite and >= 0")
            if p > POSITIVITY_TOLERANCE and cell not in means:
                raise DataError(f"cell {cell} has positive mass but no outcome mean")
        for cell, value in means.items():
            if not math.isfinite(value):
                raise DataError(f"outcome mean of cell {cell} is not finite")

        total = math.fsum(probabilities.values())
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise DataError(f"probabilities sum to {total!r}, expected 1")

        object.__setattr__(self, "probabilities", probabilities)
        object.__setattr__(self, "outcome_means", means)
        object.__setattr__(self, "x_labels", tuple(dict.fromkeys(cell[0] for cell in probabilities)))
        object.__setattr__(self, "u_labels", tuple(dict.fromkeys(cell[1] for cell in probabilities)))

    def p(self, x: Hashable, u: Hashable, a: Hashable) -> float:
        return self.probabilities.get((x, u, a), 0.0)

    def mean(self, x: Hashable, u: Hashable, a: Hashable) -> float:
        return self.outcome_means[(x, u, a)]


def _positive(p: float) -> bool:
    return p > POSITIVITY_TOLERANCE


def tau_adjusted(joint: DiscreteJoint) -> float:
    """
    同时调整X与U后的平均因果效应τ

    Raises:
        DomainError: 某个 (x, u) 层缺少一种处理水平
    """
    terms: List[float] = []
    for x in joint.x_labels:
        for u in joint.u_labels:
            p1 = joint.p(x, u, joint.a1)
            p0 = joint.p(x, u, joint.a0)
            stratum = p1 + p0
            if not _positive(stratum):
                continue
            if not (_positive(p1) and _positive(p0)):
                raise DomainError(f"positivity violated in stratum x={x!r}, u={u!r}")
            contrast = joint.mean(x, u, joint.a1) - joint.mean(x, u, joint.a0)
            terms.append(contrast * stratum)
    return math.fsum(terms)


def _conditional_mean(joint: DiscreteJoint, x: Hashable, a: Hashable, p_xa: float) -> float:
    parts = []
    for u in joint.u_labels:
        p = joint.p(x, u, a)
        if _positive(p):
            parts.append(joint.mean(x, u, a) * (p / p_xa))
    return math.fsum(parts)


def tau_star(joint: DiscreteJoint) -> float:
    """
    只调整X时的观测效应τ*

    Raises:
        DomainError: 某个x层缺少一种处理水平
    """
    terms: List[float] = []
    for x in joint.x_labels:
        p_x1 = math.fsum(joint.p(x, u, joint.a1) for u in joint.u_labels)
        p_x0 = math.fsum(joint.p(x, u, joint.a0) for u in joint.u_labels)
        p_x = math.fsum(
            joint.p(x, u, a) for u in joint.u_labels for a in (joint.a0, joint.a1)
        )
        if not _positive(p_x):
            continue
        if not (_positive(p_x1) and _positive(p_x0)):
            raise DomainError(f"positivity violated in stratum x={x!r}")
        contrast = _conditional_mean(joint, x, joint.a1, p_x1) - _conditional_mean(joint, x, joint.a0, p_x0)
        terms.append(contrast * p_x)
    return math.fsum(terms)


def confounding_bias(joint: DiscreteJoint) -> float:
    """偏倚 τ* − τ"""
    return tau_star(joint) - tau_adjusted(joint)


def joint_from_records(
    records: Iterable[Mapping[str, object]],
    a0: Hashable = 0,
    a1: Hashable = 1,
) -> DiscreteJoint:
    """
    由 (x, u, a, p, ey) 记录构建联合分布

    Args:
        records: 每条记录含键 x, u, a, p, ey
        a0: 基线处理水平
        a1: 激活处理水平

    Returns:
        联合分布
    """
    probabilities: Dict[Cell, float] = {}
    means: Dict[Cell, float] = {}
    for index, record in enumerate(records):
        missing = [key for key in ("x", "u", "a", "p", "ey") if key not in record]
        if missing:
            raise DataError(f"record {index} lacks fields: {', '.join(missing)}")
        cell = (record["x"], record["u"], record["a"])
        if cell in probabilities:
            raise DataError(f"duplicate cell {cell}")
        probabilities[cell] = float(record["p"])
        means[cell] = float(record["ey"])
    return DiscreteJoint(probabilities, means, a0=a0, a1=a1)


def joint_from_frame(frame: pd.DataFrame) -> DiscreteJoint:
    """从 x, u, a, p, ey 五列的表格构建联合分布"""
    missing = [name for name in ("x", "u", "a", "p", "ey") if name not in frame.columns]
    if missing:
        raise DataError(f"joint table lacks columns: {', '.join(missing)}")
    frame = frame.copy()
    frame["a"] = frame["a"].astype(float)
    return joint_from_records(frame.to_dict(orient="records"), a0=0.0, a1=1.0)


def joint_from_distribution(
    pmf: Mapping[Tuple[Hashable, Hashable, Hashable, float], float],
    a0: Hashable = 0,
    a1: Hashable = 1,
) -> DiscreteJoint:
    """
    由 (x, u, a, y) 的完整离散分布推出条件均值

    Args:
        pmf: (x, u, a, y) -> 概率，y为数值

    Returns:
        联合分布
    """
    mass: Dict[Cell, List[float]] = {}
    weighted: Dict[Cell, List[float]] = {}
    for (x, u, a, y), p in pmf.items():
        cell = (x, u, a)
        mass.setdefault(cell, []).append(float(p))
        weighted.setdefault(cell, []).append(float(p) * float(y))

    probabilities = {cell: math.fsum(parts) for cell, parts in mass.items()}
    means = {
        cell: math.fsum(weighted[cell]) / probabilities[cell]
        for cell in probabilities
        if _positive(probabilities[cell])
    }
    return DiscreteJoint(probabilities, means, a0=a0, a1=a1)


def joint_from_table(
    data: DataTable,
    treatment: str,
    outcome: str,
    confounder: str,
    covariate: Optional[str] = None,
) -> DiscreteJoint:
    """
    从U可见的数据（如模拟数据）估计经验联合分布

    Args:
        data: 数据表，处理列为0/1，混杂与协变量列为离散取值
        treatment: 处理列
        outcome: 结果列
        confounder: 离散的U列
        covariate: 可选的离散X列，缺省时X只有一个水平

    Returns:
        经验联合分布
    """
    a = data.binary_column(treatment)
    frame = pd.DataFrame({
        "x": data.column(covariate) if covariate else np.zeros(data.n),
        "u": data.column(confounder),
        "a": a,
        "y": data.column(outcome),
    })
    if frame.empty:
        raise DataError("cannot build a joint from an empty table")
    grouped = frame.groupby(["x", "u", "a"], sort=True)["y"].agg(["size", "mean"])
    probabilities = {cell: float(row["size"]) / len(frame) for cell, row in grouped.iterrows()}
    means = {cell: float(row["mean"]) for cell, row in grouped.iterrows()}

    # 频率之和存在舍入误差，重新归一
    total = math.fsum(probabilities.values())
    probabilities = {cell: p / total for cell, p in probabilities.items()}
    logger.info(f"经验联合分布: {len(probabilities)} 个格子, n={len(frame)}")
    return DiscreteJoint(probabilities, means, a0=0.0, a1=1.0)
