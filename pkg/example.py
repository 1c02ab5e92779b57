"""
ConfSense - 使用示例
"""
import os
import sys
from datetime import datetime

# 添加项目根目录到Python路径
sys.path.append(os.path.dirname(__file__))

from config.settings import settings
from src.utils.logger import setup_logger
from src.utils.errors import ConfsenseError
from loguru import logger


def example_workflow():
    """完整工作流程示例：模拟、估计、三类敏感性分析与方法选择"""
    logger.info("开始 ConfSense 示例")

    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    session_dir = settings.OUTPUT_DIR / f"session_{timestamp}"
    session_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"本次运行会话目录: {session_dir}")

    # 1. 模拟数据
    logger.info("步骤1: 从示例模型模拟数据")
    from src.scm.spec import build_paper_dgp
    from src.scm.simulator import simulate, rng_algorithm
    from src.utils.csv_io import write_frame

    spec = build_paper_dgp()
    data = simulate(spec, settings.DEFAULT_N, settings.DEFAULT_SEED)
    write_frame(data.to_frame(), session_dir / "paper_dgp.csv", "example simulate",
                seed=settings.DEFAULT_SEED, rng=rng_algorithm())
    logger.success(f"模拟完成: {data.n} 行")

    # 2. 真实估计量
    logger.info("步骤2: 计算真实估计量")
    from src.scm.truth import EstimandQuery, true_estimand

    for kind in ("NDE", "NIE"):
        result = true_estimand(spec, EstimandQuery(kind, "A", "Y", mediator="M"),
                               n_mc=settings.MC_N, seed=settings.DEFAULT_SEED)
        logger.info(f"真实 {kind} = {result.value:.4f} ({result.method})")

    # 3. 第一种设定：处理-结果混杂
    logger.info("步骤3: 处理-结果混杂的敏感性分析")
    from src.estimators.contrasts import diff_in_means, wald_iv
    from src.estimators.ols import ols
    from src.sensitivity.ovb import contour_grid, robustness_value
    from src.sensitivity.copula import rho_curve, summarize_for_copula

    naive = diff_in_means(data, "A", "Y")
    logger.info(f"未调整估计: {naive.estimate:.4f} (SE {naive.std_error:.4f})")

    fit = ols(data, "Y", ["A"])
    grid = contour_grid(fit, "A", settings.OVB_GRID_POINTS, settings.OVB_R2_MAX)
    write_frame(grid.to_frame(), session_dir / "ovb_contour.csv", "example sens ovb")
    logger.info(f"稳健值 RV = {robustness_value(fit, 'A'):.4f}")

    curve = rho_curve(summarize_for_copula(data, "A", "Y"), settings.RHO_MAX, settings.RHO_GRID_POINTS)
    write_frame(curve.to_frame(), session_dir / "copula_curve.csv", "example sens copula")
    logger.info(f"ρ* = {curve.rho_star}, ACE界 = {curve.bounds}")

    # 4. 第二种设定：中介-结果混杂
    logger.info("步骤4: 中介-结果混杂的敏感性分析")
    from src.estimators.mediation import fit_mediation
    from src.sensitivity.mediation import mediation_bounds

    mediation = fit_mediation(data, "A", "M", "Y", covariates=("U_AY", "U_IY"))
    bounds = mediation_bounds(mediation, settings.MEDIATION_RHO_MAX, settings.MEDIATION_GRID_POINTS)
    write_frame(bounds.to_frame(), session_dir / "mediation_grid.csv", "example sens mediation")
    logger.info(f"NDE界 = {bounds.nde_bounds}, NIE界 = {bounds.nie_bounds}")

    # 5. 第三种设定：工具变量-结果混杂
    logger.info("步骤5: 工具变量-结果混杂")
    logger.info(f"Wald估计（排除性约束被违反）: {wald_iv(data, 'I', 'A', 'Y'):.4f}")

    # 6. 方法选择
    logger.info("步骤6: 六步方法选择")
    from src.registry.records import builtin_registry
    from src.registry.workflow import load_answers, recommend

    for name in ("setting1_ace", "setting2_mediation", "setting3_iv"):
        answers = load_answers(settings.SPECS_DIR / "questionnaires" / f"{name}.json")
        recommendation = recommend(answers, builtin_registry())
        logger.info(f"{name}: 推荐 {recommendation.ranked_ids[:3]}")
        if recommendation.message:
            logger.warning(recommendation.message)

    logger.success(f"示例完成，结果保存在: {session_dir}")


def main():
    """主函数"""
    setup_logger()

    logger.info("ConfSense - 未观测混杂敏感性分析示例")
    logger.info("=" * 50)

    try:
        example_workflow()
    except ConfsenseError as e:
        logger.error(f"示例运行失败: {e}")
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()
