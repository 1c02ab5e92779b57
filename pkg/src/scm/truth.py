"""
真实因果估计量：路径追踪与蒙特卡洛干预
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Set

import numpy as np
from loguru import logger

from src.scm.simulator import draw_noise, evaluate
from src.scm.spec import LinearGaussianNode, ScmSpec
from src.utils.errors import DomainError, EstimandError

EstimandKind = Literal["ACE", "NDE", "NIE", "TOTAL", "LATE"]
TruthMethod = Literal["path-trace", "monte-carlo"]

# 蒙特卡洛标准误的数值分辨率下限
MC_SE_FLOOR = 1e-12
MIN_MC_DRAWS = 1000

LATE_CONTRACT_MESSAGE = "no ground-truth contract for LATE under exclusion violation"


@dataclass(frozen=True)
class EstimandQuery:
    """估计量查询"""
    kind: EstimandKind
    treatment: str
    outcome: str
    mediator: Optional[str] = None
    instrument: Optional[str] = None
    a0: float = 0.0
    a1: float = 1.0

    def validate(self, spec: ScmSpec) -> None:
        """检查引用的节点存在且中介/工具变量设置合理"""
        if self.kind not in ("ACE", "NDE", "NIE", "TOTAL", "LATE"):
            raise EstimandError(f"unknown estimand kind '{self.kind}'")
        for name in (self.treatment, self.outcome, self.mediator, self.instrument):
            if name is not None and name not in spec.node_names:
                raise EstimandError(f"unknown node '{name}' in query")
        if self.treatment == self.outcome:
            raise EstimandError("treatment and outcome must differ")

        needs_mediator = self.kind in ("NDE", "NIE")
        if needs_mediator != (self.mediator is not None):
            raise EstimandError("a mediator is required for NDE/NIE and only for them")
        if needs_mediator:
            on_path = any(self.mediator in path for path in directed_paths(spec, self.treatment, self.outcome))
            if not on_path:
                raise EstimandError(f"mediator '{self.mediator}' is not on a directed path treatment -> outcome")

        if (self.kind == "LATE") != (self.instrument is not None):
            raise EstimandError("an instrument is required for LATE and only for it")


@dataclass(frozen=True)
class TruthResult:
    """真实值结果，路径追踪时标准误为0"""
    value: float
    mc_std_error: float
    method: TruthMethod


def directed_paths(spec: ScmSpec, source: str, target: str) -> List[List[str]]:
    """
    枚举从source到target的所有有向路径（系数为0的边视为不存在）

    Returns:
        每条路径是节点名列表，包含两端
    """
    spec.node(source)
    spec.node(target)
    paths: List[List[str]] = []

    def _walk(current: str, trail: List[str]) -> None:
        if current == target:
            paths.append(trail)
            return
        for child, coef in spec.children(current).items():
            if coef != 0.0:
                _walk(child, trail + [child])

    _walk(source, [source])
    return paths


def _path_product(spec: ScmSpec, path: List[str]) -> float:
    product = 1.0
    for parent, child in zip(path[:-1], path[1:]):
        node = spec.node(child)
        if not isinstance(node, LinearGaussianNode):
            raise EstimandError(
                f"nonlinear path: node '{child}' on {' -> '.join(path)} is {node.kind}; use monte-carlo instead"
            )
        product *= node.coefficients[parent]
    return product


def path_trace_effect(spec: ScmSpec, treatment: str, outcome: str) -> float:
    """
    路径追踪：所有有向路径上边系数乘积之和

    Args:
        spec: 模型定义
        treatment: 处理节点
        outcome: 结果节点

    Returns:
        单位处理增量对应的总效应，无路径时为0
    """
    paths = directed_paths(spec, treatment, outcome)
    return math.fsum(_path_product(spec, path) for path in paths)


def _path_trace_query(spec: ScmSpec, query: EstimandQuery) -> float:
    paths = directed_paths(spec, query.treatment, query.outcome)
    if query.kind == "NDE":
        paths = [p for p in paths if query.mediator not in p]
    elif query.kind == "NIE":
        paths = [p for p in paths if query.mediator in p]
    effect = math.fsum(_path_product(spec, path) for path in paths)
    return effect * (query.a1 - query.a0)


def _ancestors(spec: ScmSpec, name: str) -> Set[str]:
    result: Set[str] = set()
    frontier = [name]
    while frontier:
        current = frontier.pop()
        for parent, coef in spec.node(current).parents.items():
            if coef != 0.0 and parent not in result:
                result.add(parent)
                frontier.append(parent)
    return result


def exclusion_violated(spec: ScmSpec, instrument: str, treatment: str, outcome: str) -> bool:
    """工具变量或其祖先是否能绕过处理节点到达结果"""
    sources = _ancestors(spec, instrument) | {instrument}
    for source in sources:
        for path in directed_paths(spec, source, outcome):
            if treatment not in path:
                return True
    return False


def _monte_carlo(spec: ScmSpec, query: EstimandQuery, n_mc: int, seed: int) -> TruthResult:
    noise = draw_noise(spec, n_mc, seed)
    t, y, m = query.treatment, query.outcome, query.mediator

    if query.kind in ("ACE", "TOTAL"):
        y1 = evaluate(spec, noise, n_mc, {t: query.a1})[y]
        y0 = evaluate(spec, noise, n_mc, {t: query.a0})[y]
        diffs = y1 - y0
    elif query.kind in ("NDE", "NIE"):
        # 同一单位的外生噪声在各臂之间共享
        m0 = evaluate(spec, noise, n_mc, {t: query.a0})[m]
        y_1m0 = evaluate(spec, noise, n_mc, {t: query.a1, m: m0})[y]
        if query.kind == "NDE":
            y_0m0 = evaluate(spec, noise, n_mc, {t: query.a0, m: m0})[y]
            diffs = y_1m0 - y_0m0
        else:
            y_1m1 = evaluate(spec, noise, n_mc, {t: query.a1})[y]
            diffs = y_1m1 - y_1m0
    else:
        z = query.instrument
        t1 = evaluate(spec, noise, n_mc, {z: 1.0})[t]
        t0 = evaluate(spec, noise, n_mc, {z: 0.0})[t]
        compliers = (t1 == query.a1) & (t0 == query.a0)
        if not np.any(compliers):
            raise EstimandError("no compliers in the Monte Carlo sample; LATE is undefined")
        y1 = evaluate(spec, noise, n_mc, {t: query.a1})[y]
        y0 = evaluate(spec, noise, n_mc, {t: query.a0})[y]
        diffs = (y1 - y0)[compliers]

    value = float(np.mean(diffs))
    se = float(np.std(diffs, ddof=1) / math.sqrt(diffs.size)) if diffs.size > 1 else math.inf
    return TruthResult(value=value, mc_std_error=max(se, MC_SE_FLOOR), method="monte-carlo")


def true_estimand(
    spec: ScmSpec,
    query: EstimandQuery,
    n_mc: int,
    seed: int,
    method: Literal["auto", "path-trace", "monte-carlo"] = "auto",
) -> TruthResult:
    """
    计算真实因果估计量

    Args:
        spec: 模型定义
        query: 估计量查询
        n_mc: 蒙特卡洛抽样数（>= 1000）
        seed: 种子
        method: auto 在路径追踪可行时优先使用

    Returns:
        真实值及其蒙特卡洛标准误
    """
    query.validate(spec)
    if query.kind == "LATE" and exclusion_violated(spec, query.instrument, query.treatment, query.outcome):
        raise EstimandError(LATE_CONTRACT_MESSAGE)

    if method in ("auto", "path-trace"):
        try:
            value = _path_trace_query(spec, query)
            logger.info(f"路径追踪: {query.kind} {query.treatment}->{query.outcome} = {value}")
            return TruthResult(value=value, mc_std_error=0.0, method="path-trace")
        except EstimandError:
            if method == "path-trace":
                raise
            logger.debug("路径上存在非线性节点，改用蒙特卡洛")
    elif method != "monte-carlo":
        raise EstimandError(f"unknown truth method '{method}'")

    if n_mc < MIN_MC_DRAWS:
        raise DomainError(f"n_mc must be >= {MIN_MC_DRAWS}, got {n_mc}")
    result = _monte_carlo(spec, query, n_mc, seed)
    logger.info(
        f"蒙特卡洛: {query.kind} {query.treatment}->{query.outcome} = {result.value:.4f} "
        f"(SE {result.mc_std_error:.2e}, n={n_mc})"
    )
    return result
