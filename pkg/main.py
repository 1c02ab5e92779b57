"""
ConfSense - 未观测混杂敏感性分析工具 主程序
"""
import click
from pathlib import Path
import sys
import os

# 添加项目根目录到Python路径
sys.path.append(os.path.dirname(__file__))

from config.settings import settings
from src.utils.logger import setup_logger
from src.utils.errors import ConfsenseError, DataError
from src.utils.csv_io import write_frame, write_text
from src.data.table import DataTable
from src.scm.spec import load_spec
from src.scm.simulator import rng_algorithm, simulate as simulate_spec
from src.scm.truth import EstimandQuery, true_estimand
from src.estimators.contrasts import diff_in_means, wald_iv
from src.estimators.ols import ols
from src.estimators.mediation import fit_mediation
from src.sensitivity import bias_formulas, summary as summary_sens
from src.sensitivity.ovb import contour_grid, robustness_value
from src.sensitivity.copula import rho_curve, summarize_for_copula
from src.sensitivity.mediation import mediation_bounds
from src.registry.records import builtin_registry
from src.registry.workflow import load_answers, parse_answers, recommend
from src.report.reproduce import run_reproduction
from loguru import logger
import pandas as pd

SEED = click.IntRange(0, 2 ** 64 - 1)
DATA_PATH = click.Path(dir_okay=False, path_type=Path)


def _command_line(ctx: click.Context, skip=("out",)) -> str:
    """规范化的命令行（选项按名称排序，不含输出路径）"""
    names = []
    current = ctx
    while current.parent is not None:
        names.append(current.info_name)
        current = current.parent
    parts = list(reversed(names))
    for key in sorted(ctx.params):
        value = ctx.params[key]
        if key in skip or value is None or value is False or value == ():
            continue
        flag = "--" + key.replace("_", "-")
        if value is True:
            parts.append(flag)
        elif isinstance(value, (tuple, list)):
            parts.extend(f"{flag} {item}" for item in value)
        else:
            parts.append(f"{flag} {value}")
    return " ".join(parts)


def _summary_path(out: Path) -> Path:
    return out.with_suffix(".txt")


@click.group()
def cli():
    """ConfSense: 未观测混杂的敏感性分析"""
    pass


@cli.command()
@click.option('--spec', type=click.Path(dir_okay=False, path_type=Path), help='模型定义JSON，缺省为示例模型')
@click.option('--n', default=settings.DEFAULT_N, type=click.IntRange(min=0), show_default=True, help='样本量')
@click.option('--seed', default=settings.DEFAULT_SEED, type=SEED, show_default=True, help='随机种子')
@click.option('--threads', type=click.IntRange(min=0), help='线程数上限')
@click.option('--out', '-o', required=True, type=click.Path(dir_okay=False, path_type=Path), help='输出CSV')
@click.pass_context
def simulate(ctx, spec, n, seed, threads, out):
    """从结构因果模型抽样"""
    model = load_spec(spec or settings.SPECS_DIR / "paper_dgp.json")
    table = simulate_spec(model, n, seed, threads=threads)
    write_frame(table.to_frame(), out, _command_line(ctx, skip=("out", "threads")), seed=seed, rng=rng_algorithm())
    click.echo(f"wrote {table.n} rows x {len(table.names)} columns to {out}")
    return 0


@cli.command()
@click.option('--spec', type=click.Path(dir_okay=False, path_type=Path), help='模型定义JSON，缺省为示例模型')
@click.option('--kind', required=True, type=click.Choice(["ACE", "NDE", "NIE", "TOTAL", "LATE"]), help='估计量')
@click.option('--treatment', default="A", show_default=True)
@click.option('--outcome', default="Y", show_default=True)
@click.option('--mediator', help='NDE/NIE 的中介节点')
@click.option('--instrument', help='LATE 的工具变量节点')
@click.option('--method', default="auto", type=click.Choice(["auto", "path-trace", "monte-carlo"]), show_default=True)
@click.option('--n-mc', default=settings.MC_N, type=click.IntRange(min=1), show_default=True, help='蒙特卡洛抽样数')
@click.option('--seed', default=settings.DEFAULT_SEED, type=SEED, show_default=True)
@click.option('--out', '-o', type=click.Path(dir_okay=False, path_type=Path), help='可选的输出CSV')
@click.pass_context
def truth(ctx, spec, kind, treatment, outcome, mediator, instrument, method, n_mc, seed, out):
    """计算真实因果估计量"""
    model = load_spec(spec or settings.SPECS_DIR / "paper_dgp.json")
    query = EstimandQuery(kind=kind, treatment=treatment, outcome=outcome, mediator=mediator, instrument=instrument)
    result = true_estimand(model, query, n_mc=n_mc, seed=seed, method=method)
    click.echo(f"{kind} {treatment}->{outcome}: {result.value:.6f} (mc se {result.mc_std_error:.3g}, {result.method})")
    if out:
        frame = pd.DataFrame([{"kind": kind, "value": result.value, "mc_std_error": result.mc_std_error, "method": result.method}])
        write_frame(frame, out, _command_line(ctx), seed=seed if result.method == "monte-carlo" else None)
    return 0


@cli.command()
@click.option('--data', required=True, type=DATA_PATH, help='数据CSV')
@click.option('--method', 'estimator', required=True, type=click.Choice(["diff-in-means", "ols", "wald", "mediation"]))
@click.option('--treatment', default="A", show_default=True)
@click.option('--outcome', default="Y", show_default=True)
@click.option('--mediator', default="M", show_default=True)
@click.option('--instrument', default="I", show_default=True)
@click.option('--covariate', multiple=True, help='额外回归量/协变量，可重复')
@click.option('--out', '-o', type=click.Path(dir_okay=False, path_type=Path), help='可选的输出CSV')
@click.pass_context
def estimate(ctx, data, estimator, treatment, outcome, mediator, instrument, covariate, out):
    """计算观测估计量"""
    table = DataTable.read_csv(data)
    if estimator == "diff-in-means":
        contrast = diff_in_means(table, treatment, outcome)
        rows = [{"term": treatment, "estimate": contrast.estimate, "std_error": contrast.std_error}]
    elif estimator == "ols":
        fit = ols(table, outcome, [treatment, *covariate])
        rows = [
            {"term": name, "estimate": fit.coefficients[name], "std_error": fit.std_errors[name], "t_value": fit.t_values[name]}
            for name in fit.coefficients
        ]
    elif estimator == "wald":
        rows = [{"term": treatment, "estimate": wald_iv(table, instrument, treatment, outcome)}]
    else:
        fit = fit_mediation(table, treatment, mediator, outcome, covariates=covariate)
        rows = [
            {"term": name, "estimate": getattr(fit, name)}
            for name in ("beta1", "beta2", "beta3", "gamma", "sigma1", "sigma2", "rho_tilde")
        ]

    frame = pd.DataFrame(rows)
    click.echo(frame.to_string(index=False))
    if out:
        write_frame(frame, out, _command_line(ctx))
    return 0


@cli.group()
def sens():
    """敏感性分析"""
    pass


@sens.command()
@click.option('--rr', type=float, help='风险比点估计')
@click.option('--lower', type=float, help='风险比置信下限')
@click.option('--upper', type=float, help='风险比置信上限')
@click.option('--smd', type=float, help='标准化均值差（代替 --rr）')
@click.option('--se', type=float, help='标准化均值差的标准误')
@click.option('--out', '-o', type=click.Path(dir_okay=False, path_type=Path), help='可选的文本摘要')
@click.pass_context
def evalue(ctx, rr, lower, upper, smd, se, out):
    """E值"""
    if (rr is None) == (smd is None):
        raise click.UsageError("give exactly one of --rr or --smd")
    if smd is not None:
        if se is None:
            raise click.UsageError("--smd needs --se")
        e_point, e_ci = summary_sens.evalue_smd(smd, se)
        lines = [f"RR (from SMD): {summary_sens.rr_from_smd(smd):.4f}", f"E-value (point): {e_point:.3f}", f"E-value (CI): {e_ci:.3f}"]
    else:
        risk = summary_sens.RiskSummary(rr, lower, upper)
        if lower is None:
            lines = [f"E-value (point): {summary_sens.evalue_point(rr):.3f}"]
        else:
            e_point, e_ci = summary_sens.evalue_ci(risk)
            lines = [f"E-value (point): {e_point:.3f}", f"E-value (CI): {e_ci:.3f}"]
    text = "\n".join(lines)
    click.echo(text)
    if out:
        write_text(text, out, _command_line(ctx))
    return 0


@sens.command()
@click.option('--data', type=DATA_PATH, help='数据CSV（二值处理与结果）')
@click.option('--treatment', default="A", show_default=True)
@click.option('--outcome', default="Y", show_default=True)
@click.option('--covariate', help='可选的离散协变量，分层计算')
@click.option('--p-treat', type=float, help='P(A=1)')
@click.option('--p-y1-t1', type=float, help='P(Y=1|A=1)')
@click.option('--p-y1-t0', type=float, help='P(Y=1|A=0)')
@click.option('--out', '-o', type=click.Path(dir_okay=False, path_type=Path), help='可选的输出CSV')
@click.pass_context
def manski(ctx, data, treatment, outcome, covariate, p_treat, p_y1_t1, p_y1_t0, out):
    """无假设界"""
    if data is not None:
        bounds = summary_sens.manski_bounds_from_table(DataTable.read_csv(data), treatment, outcome, covariate)
    elif None not in (p_treat, p_y1_t1, p_y1_t0):
        bounds = summary_sens.manski_bounds(p_treat, p_y1_t1, p_y1_t0)
    else:
        raise click.UsageError("give --data or all of --p-treat, --p-y1-t1, --p-y1-t0")

    frame = pd.DataFrame([
        {"quantity": "E[Y(1)]", "lower": bounds.y1_lower, "upper": bounds.y1_upper},
        {"quantity": "E[Y(0)]", "lower": bounds.y0_lower, "upper": bounds.y0_upper},
        {"quantity": "ATE", "lower": bounds.ate_lower, "upper": bounds.ate_upper},
    ])
    click.echo(frame.to_string(index=False))
    if out:
        write_frame(frame, out, _command_line(ctx))
    return 0


@sens.command()
@click.option('--data', required=True, type=DATA_PATH, help='数据CSV')
@click.option('--treatment', default="A", show_default=True)
@click.option('--outcome', default="Y", show_default=True)
@click.option('--covariate', multiple=True, help='观测协变量，可重复')
@click.option('--grid', default=settings.OVB_GRID_POINTS, type=click.IntRange(min=2), show_default=True, help='每轴点数')
@click.option('--r2max', default=settings.OVB_R2_MAX, type=float, show_default=True, help='偏R²轴上限')
@click.option('--q', default=1.0, type=float, show_default=True, help='稳健值的缩小比例')
@click.option('--out', '-o', type=click.Path(dir_okay=False, path_type=Path), help='等值线长表CSV')
@click.pass_context
def ovb(ctx, data, treatment, outcome, covariate, grid, r2max, q, out):
    """遗漏变量偏倚（偏R²）"""
    fit = ols(DataTable.read_csv(data), outcome, [treatment, *covariate])
    contour = contour_grid(fit, treatment, grid, r2max)
    rv = robustness_value(fit, treatment, q)
    text = "\n".join([
        f"estimate: {fit.coefficient(treatment):.4f} (se {fit.std_error(treatment):.4f}, t {fit.t_value(treatment):.2f}, df {fit.df})",
        f"partial R2 of treatment with outcome: {fit.partial_r2(treatment):.4f}",
        f"robustness value (q={q:g}): {rv:.4f}",
        f"zero contour inside grid: {'yes' if contour.has_sign_change() else 'no'}",
    ])
    click.echo(text)
    if out:
        command = _command_line(ctx)
        write_frame(contour.to_frame(), out, command)
        write_text(text, _summary_path(out), command)
    return 0


@sens.command()
@click.option('--data', required=True, type=DATA_PATH, help='数据CSV')
@click.option('--treatment', default="A", show_default=True)
@click.option('--outcome', default="Y", show_default=True)
@click.option('--rho-max', default=settings.RHO_MAX, type=float, show_default=True)
@click.option('--grid', default=settings.RHO_GRID_POINTS, type=int, show_default=True, help='奇数点数')
@click.option('--mode', default="exact", type=click.Choice(["naive", "exact"]), show_default=True)
@click.option('--out', '-o', type=click.Path(dir_okay=False, path_type=Path), help='曲线CSV (rho, ace)')
@click.pass_context
def copula(ctx, data, treatment, outcome, rho_max, grid, mode, out):
    """高斯copula ρ 敏感性"""
    summary = summarize_for_copula(DataTable.read_csv(data), treatment, outcome)
    curve = rho_curve(summary, rho_max, grid, mode)
    star = "not nullifiable in range" if curve.rho_star is None else f"{curve.rho_star:.4f}"
    text = "\n".join([
        f"unadjusted ACE: {summary.tau_unadj:.4f} (p={summary.p:.4f}, s={summary.s:.4f}, n={summary.n})",
        f"rho*: {star}",
        f"ACE bounds over |rho| <= {rho_max:g} ({mode}): [{curve.bounds[0]:.4f}, {curve.bounds[1]:.4f}]",
    ])
    click.echo(text)
    if out:
        command = _command_line(ctx)
        write_frame(curve.to_frame(), out, command)
        write_text(text, _summary_path(out), command)
    return 0


@sens.command()
@click.option('--data', required=True, type=DATA_PATH, help='数据CSV')
@click.option('--treatment', default="A", show_default=True)
@click.option('--mediator', default="M", show_default=True)
@click.option('--outcome', default="Y", show_default=True)
@click.option('--covariate', multiple=True, help='观测协变量，可重复')
@click.option('--rho-max', default=settings.MEDIATION_RHO_MAX, type=float, show_default=True)
@click.option('--grid', default=settings.MEDIATION_GRID_POINTS, type=int, show_default=True, help='奇数点数')
@click.option('--out', '-o', type=click.Path(dir_okay=False, path_type=Path), help='网格CSV (rho, nde, nie)')
@click.pass_context
def mediation(ctx, data, treatment, mediator, outcome, covariate, rho_max, grid, out):
    """中介效应的误差相关 ρ 敏感性"""
    fit = fit_mediation(DataTable.read_csv(data), treatment, mediator, outcome, covariates=covariate)
    result = mediation_bounds(fit, rho_max, grid)
    nie0, nde0 = result.at_zero()
    text = "\n".join([
        f"total effect: {fit.beta1:.4f}; rho~ = {fit.rho_tilde:.4f}",
        f"at rho = 0: NDE {nde0:.4f}, NIE {nie0:.4f}",
        f"NDE bounds: [{result.nde_bounds[0]:.4f}, {result.nde_bounds[1]:.4f}]",
        f"NIE bounds: [{result.nie_bounds[0]:.4f}, {result.nie_bounds[1]:.4f}]",
    ])
    click.echo(text)
    if out:
        command = _command_line(ctx)
        write_frame(result.to_frame(), out, command)
        write_text(text, _summary_path(out), command)
    return 0


@sens.command('bias-table')
@click.option('--joint', required=True, type=DATA_PATH, help='联合分布CSV (x, u, a, p, ey)')
@click.option('--out', '-o', type=click.Path(dir_okay=False, path_type=Path), help='可选的文本摘要')
@click.pass_context
def bias_table(ctx, joint, out):
    """离散偏倚分解 τ、τ* 与偏倚"""
    if not joint.exists():
        raise DataError(f"joint table not found: {joint}")
    try:
        frame = pd.read_csv(joint, comment="#", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot parse joint table {joint}: {e}") from e
    model = bias_formulas.joint_from_frame(frame)
    tau = bias_formulas.tau_adjusted(model)
    tau_star = bias_formulas.tau_star(model)
    text = "\n".join([f"tau: {tau:.6f}", f"tau_star: {tau_star:.6f}", f"bias: {tau_star - tau:.6f}"])
    click.echo(text)
    if out:
        write_text(text, out, _command_line(ctx))
    return 0


@cli.command()
@click.option('--answers', 'answers_file', type=click.Path(dir_okay=False, path_type=Path), help='问卷答案JSON')
@click.option('--estimand', help='第1步：估计量（或 any）')
@click.option('--position', help='第2步：混杂位置（或 any）')
@click.option('--metric', multiple=True, help='第3步：可接受的度量，可重复；缺省为 any')
@click.option('--outcome-type', default="any", show_default=True, help='第3步：结果类型')
@click.option('--covariates', is_flag=True, help='第4步：需要调整观测协变量')
@click.option('--want-assumption-free', is_flag=True, help='第5步：偏好无假设方法')
@click.option('--distribution-prior', is_flag=True, help='第5步：对U的分布有先验')
@click.option('--multiple-confounders', is_flag=True, help='第5步：存在多个未观测混杂')
@click.option('--functional-class', multiple=True, help='第6步：可接受的函数形式，可重复；缺省为 no-preference')
@click.option('--out', '-o', type=click.Path(dir_okay=False, path_type=Path), help='可选的输出CSV')
@click.pass_context
def workflow(ctx, answers_file, estimand, position, metric, outcome_type, covariates,
             want_assumption_free, distribution_prior, multiple_confounders, functional_class, out):
    """六步方法选择流程"""
    if answers_file:
        answers = load_answers(answers_file)
    else:
        answers = parse_answers({
            "step1_estimand": estimand,
            "step2_position": position,
            "step3_metrics": list(metric) or "any",
            "step3_outcome_type": outcome_type,
            "step4_covariate_adjustment": covariates,
            "step5_confounder": {
                "distribution_prior": distribution_prior,
                "count": "multiple" if multiple_confounders else "single",
                "want_assumption_free": want_assumption_free,
            },
            "step6_functional_classes": list(functional_class) or "no-preference",
        })
    recommendation = recommend(answers, builtin_registry())
    click.echo(recommendation.report())
    if out:
        write_frame(recommendation.to_frame(), out, _command_line(ctx))
    return 0


@cli.command('reproduce-paper')
@click.option('--seed', default=settings.DEFAULT_SEED, type=SEED, show_default=True)
@click.option('--n', default=settings.DEFAULT_N, type=click.IntRange(min=1000), show_default=True)
@click.option('--threads', type=click.IntRange(min=0), help='线程数上限')
@click.option('--out', '-o', type=click.Path(file_okay=False, path_type=Path), help='报告输出目录')
@click.pass_context
def reproduce_paper(ctx, seed, n, threads, out):
    """复现示例模型的三种设定"""
    report = run_reproduction(seed, n, threads=threads)
    click.echo(report.summary())
    click.echo(f"runtime: {report.runtime_seconds:.1f} s")
    if out:
        command = _command_line(ctx, skip=("out", "threads"))
        write_frame(report.to_frame(), out / "reproduce_report.csv", command, seed=seed)
        write_text(report.summary(), out / "reproduce_summary.txt", command, seed=seed)
    return 0 if report.passed else 3


def run(argv=None) -> int:
    """
    运行命令行并返回退出码

    0 成功，1 用法错误或问卷格式错误，2 输入数据错误，3 数值失败
    """
    args = list(sys.argv[1:] if argv is None else argv)
    with logger.contextualize(command=" ".join(args) or "-"):
        try:
            result = cli.main(args=args, prog_name="confsense", standalone_mode=False)
        except click.exceptions.Abort:
            return 1
        except click.ClickException as e:
            e.show()
            return 1
        except ConfsenseError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"error: {e}", err=True)
            return e.exit_code
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    # 初始化日志
    setup_logger()

    # 运行CLI
    sys.exit(run())
