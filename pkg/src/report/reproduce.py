"""
示例模型三种设定的端到端复现
"""
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from loguru import logger

from config.settings import settings
from src.data.table import DataTable
from src.estimators.contrasts import diff_in_means, wald_iv
from src.estimators.mediation import fit_mediation
from src.estimators.ols import ols
from src.registry.records import builtin_registry
from src.registry.workflow import WorkflowAnswers, recommend
from src.scm.simulator import simulate
from src.scm.spec import build_paper_dgp
from src.scm.truth import EstimandQuery, path_trace_effect, true_estimand
from src.sensitivity.copula import rho_curve, summarize_for_copula
from src.sensitivity.mediation import mediation_bounds
from src.sensitivity.ovb import contour_grid, robustness_value

PATH_TRACE_TOLERANCE = 1e-9
REFERENCE_TOLERANCE = 0.3

IV_GAP_STATEMENT = (
    "Setting 3 (LATE with an instrument-outcome confounder): no suitable sensitivity "
    "analysis could be identified for this estimand; only the bias of the Wald estimator is demonstrated."
)


@dataclass(frozen=True)
class ReproRow:
    """一项对照：参考值、计算值与接受区间"""
    metric: str
    reference: float
    computed: float
    lower: float
    upper: float
    citation: str

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.computed) and self.lower <= self.computed <= self.upper)


@dataclass
class ReproReport:
    """复现结果；运行时间只打印，不写入文件"""
    seed: int
    n: int
    rows: List[ReproRow] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    runtime_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def add(self, metric: str, reference: float, computed: float, lower: float, upper: float, citation: str) -> None:
        row = ReproRow(metric, float(reference), float(computed), float(lower), float(upper), citation)
        self.rows.append(row)
        level = "info" if row.passed else "warning"
        getattr(logger, level)(f"{metric}: {computed:.6g} in [{lower:.6g}, {upper:.6g}] -> {'PASS' if row.passed else 'FAIL'}")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "metric": r.metric,
                "reference": r.reference,
                "computed": r.computed,
                "lower": r.lower,
                "upper": r.upper,
                "passed": r.passed,
                "citation": r.citation,
            }
            for r in self.rows
        ], columns=["metric", "reference", "computed", "lower", "upper", "passed", "citation"])

    def summary(self) -> str:
        width = max((len(r.metric) for r in self.rows), default=10)
        lines = [f"Reproduction: n={self.n}, seed={self.seed}"]
        for r in self.rows:
            status = "PASS" if r.passed else "FAIL"
            lines.append(
                f"  [{status}] {r.metric:<{width}}  computed {r.computed:>10.4f}  "
                f"reference {r.reference:>8.3f}  band [{r.lower:.4g}, {r.upper:.4g}]"
            )
        lines.extend(self.notes)
        lines.append(f"Overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _ground_truths(report: ReproReport, seed: int, n: int) -> None:
    spec = build_paper_dgp()
    exact = [
        ("true ACE A->M (path trace)", path_trace_effect(spec, "A", "M"), -1.5, "true ACE of A on M is -1.5"),
        ("true ACE A->Y (path trace)", path_trace_effect(spec, "A", "Y"), 0.0, "total effect of A on Y is 0"),
        ("true ACE M->Y (path trace)", path_trace_effect(spec, "M", "Y"), 2.0, "true ACE of M on Y is +2"),
    ]
    for metric, value, reference, citation in exact:
        report.add(metric, reference, value, reference - PATH_TRACE_TOLERANCE, reference + PATH_TRACE_TOLERANCE, citation)

    for kind, reference, citation in (("NDE", 3.0, "true NDE of A on Y is +3"), ("NIE", -3.0, "true NIE via M is -3")):
        query = EstimandQuery(kind=kind, treatment="A", outcome="Y", mediator="M")
        traced = true_estimand(spec, query, n_mc=n, seed=seed, method="path-trace")
        report.add(f"true {kind} (path trace)", reference, traced.value,
                   reference - PATH_TRACE_TOLERANCE, reference + PATH_TRACE_TOLERANCE, citation)
        mc = true_estimand(spec, query, n_mc=n, seed=seed, method="monte-carlo")
        band = 3.0 * mc.mc_std_error
        report.add(f"true {kind} (Monte Carlo)", reference, mc.value, reference - band, reference + band, citation)


def _setting_ace(report: ReproReport, data: DataTable) -> None:
    naive = diff_in_means(data, "A", "Y")
    report.add("unadjusted ACE (difference in means)", 2.3, naive.estimate, 2.0, 2.4,
               "unadjusted ACE estimate is obtained as 2.3")
    fit = ols(data, "Y", ["A"])
    report.add("unadjusted ACE (OLS)", 2.3, fit.coefficient("A"), 2.0, 2.4,
               "unadjusted ACE estimate is obtained as 2.3")

    grid = contour_grid(fit, "A", settings.OVB_GRID_POINTS, settings.OVB_R2_MAX)
    report.add("OVB grid minimum adjusted ACE", 0.0, float(np.min(grid.estimates)), -math.inf, 0.0,
               "true ACE = 0 is indeed present (sensitivity contour)")
    report.add("OVB robustness value", 0.30, robustness_value(fit, "A"), 0.0, settings.OVB_R2_MAX,
               "derived: partial R2 needed to explain away the estimate lies inside the plotted range")

    summary = summarize_for_copula(data, "A", "Y")
    curve = rho_curve(summary, settings.RHO_MAX, settings.RHO_GRID_POINTS, mode="exact")
    tau0 = curve.aces[curve.rhos.index(0.0)]
    report.add("copula tau(0)", 2.1, tau0, 2.0, 2.4,
               "unadjusted ACE is recovered as +2.1 by the copula model at rho = 0")
    report.add("copula tau(0) minus naive estimate", 0.0, tau0 - naive.estimate, 0.0, 0.0,
               "unadjusted ACE is recovered at rho = 0")
    rho_star = curve.rho_star if curve.rho_star is not None else math.nan
    report.add("copula rho nullifying", 0.47, rho_star, 0.38, 0.55, "true ACE = 0 corresponds to rho = +0.47")
    report.add("copula lower ACE bound", -1.7, curve.bounds[0], -math.inf, 0.0, "bounds of the ACE [-1.7, +4.4] contain 0")
    report.add("copula upper ACE bound", 4.4, curve.bounds[1], 0.0, math.inf, "bounds of the ACE [-1.7, +4.4] contain 0")

    naive_curve = rho_curve(summary, settings.RHO_MAX, settings.RHO_GRID_POINTS, mode="naive")
    rhos = np.asarray(naive_curve.rhos)
    aces = np.asarray(naive_curve.aces)
    slope, intercept = np.polyfit(rhos, aces, 1)
    residual = float(np.max(np.abs(aces - (slope * rhos + intercept))))
    scale = max(1.0, float(np.max(np.abs(aces))))
    report.add("copula naive-mode linearity residual", 0.0, residual, 0.0, 1e-12 * scale,
               "ACE is a linear function of rho")


def _setting_mediation(report: ReproReport, data: DataTable) -> None:
    # 第二种设定中只有 U_MY 未观测
    fit = fit_mediation(data, "A", "M", "Y", covariates=("U_AY", "U_IY"))
    result = mediation_bounds(fit, settings.MEDIATION_RHO_MAX, settings.MEDIATION_GRID_POINTS)
    nde_lo, nde_hi = result.nde_bounds
    nie_lo, nie_hi = result.nie_bounds
    citation = "bounds for the NDE as [-0.275, 4.186]"
    for metric, reference, value in (
        ("mediation NDE lower bound", -0.275, nde_lo),
        ("mediation NDE upper bound", 4.186, nde_hi),
        ("mediation NIE lower bound", -4.161, nie_lo),
        ("mediation NIE upper bound", 0.300, nie_hi),
    ):
        report.add(metric, reference, value, reference - REFERENCE_TOLERANCE, reference + REFERENCE_TOLERANCE, citation)
    report.add("true NDE inside mediation bounds", 3.0, 3.0, nde_lo, nde_hi, "true NDE/NIE are within the provided bounds")
    report.add("true NIE inside mediation bounds", -3.0, -3.0, nie_lo, nie_hi, "true NDE/NIE are within the provided bounds")
    drift = max(abs(nde + nie - fit.beta1) for nde, nie in zip(result.nde, result.nie))
    report.add("NDE + NIE minus total effect", 0.0, drift, 0.0, 1e-10 * max(1.0, abs(fit.beta1)), "ACE = NDE + NIE")


def _setting_iv(report: ReproReport, data: DataTable, seed: int, n: int, threads: Optional[int]) -> None:
    biased = wald_iv(data, "I", "A", "Y")
    report.add("Wald estimate (exclusion violated)", 6.31, biased, 6.0, 6.6,
               "derived: closed-form ratio of reduced form to first stage under the shipped model")
    restored_spec = build_paper_dgp().with_coefficient("Y", "U_IY", 0.0)
    restored = simulate(restored_spec, n, seed, threads=threads)
    report.add("Wald estimate (exclusion restored)", 0.0, wald_iv(restored, "I", "A", "Y"), -0.1, 0.1,
               "derived: zero homogeneous effect once U_IY leaves the outcome equation")

    answers = WorkflowAnswers(step1_estimand="LATE", step2_position="instrument-outcome")
    recommendation = recommend(answers, builtin_registry())
    implemented = sum(1 for r in recommendation.ranked if r.implemented)
    report.add("implemented methods for LATE", 0.0, float(implemented), 0.0, 0.0,
               "could not identify a suitable sensitivity analysis")
    report.notes.append(IV_GAP_STATEMENT)
    report.notes.append(f"Workflow: {recommendation.message}")


def run_reproduction(seed: int, n: int, threads: Optional[int] = None) -> ReproReport:
    """
    运行三种设定并与参考值比较

    Args:
        seed: 随机种子
        n: 样本量
        threads: 线程数上限

    Returns:
        复现报告
    """
    start = time.perf_counter()
    report = ReproReport(seed=seed, n=n)
    data = simulate(build_paper_dgp(), n, seed, threads=threads)

    _ground_truths(report, seed, n)
    _setting_ace(report, data)
    _setting_mediation(report, data)
    _setting_iv(report, data, seed, n, threads)

    report.runtime_seconds = time.perf_counter() - start
    logger.info(f"复现完成: {'通过' if report.passed else '未通过'}, 用时 {report.runtime_seconds:.1f} 秒")
    return report
