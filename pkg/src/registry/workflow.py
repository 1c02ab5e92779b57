"""
六步方法选择流程

硬条件（不满足即排除，"any" 与 "no-preference" 为通配）：第1步估计量、第2步混杂位置、第3步度量与结果类型、第6步函数形式。
软条件（只降低排名）：第4步协变量调整、第5步对未观测混杂的假设。
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.registry.records import (
    Estimand,
    FunctionalClass,
    MethodRecord,
    Metric,
    OutcomeType,
    Position,
)
from src.utils.errors import WorkflowAnswersError

GAP_MESSAGE = (
    "none of the implemented methods fits this setting; "
    "the reviewed literature offers no ready-to-run sensitivity analysis here, "
    "see the catalogued records below"
)
EMPTY_MESSAGE = "no reviewed method satisfies the hard criteria"


class ConfounderAssumptions(BaseModel):
    """第5步：对未观测混杂U的了解"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    value_type: Literal["binary", "continuous", "categorical", "unknown"] = "unknown"
    distribution_prior: bool = False
    count: Literal["single", "multiple"] = "single"
    want_assumption_free: bool = False


class WorkflowAnswers(BaseModel):
    """六个步骤各一项答案"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    step1_estimand: Union[Literal["any"], Estimand]
    step2_position: Union[Literal["any"], Position]
    step2_note: str = ""
    step3_metrics: Union[Literal["any"], List[Metric]] = "any"
    step3_outcome_type: OutcomeType = "any"
    step4_covariate_adjustment: bool = False
    step5_confounder: ConfounderAssumptions = Field(default_factory=ConfounderAssumptions)
    step6_functional_classes: Union[Literal["no-preference"], List[FunctionalClass]] = "no-preference"


@dataclass(frozen=True)
class RankedMethod:
    method_id: str
    rationale: str
    unmet: Tuple[str, ...]
    implemented: bool


@dataclass(frozen=True)
class ExcludedMethod:
    method_id: str
    criterion: str


@dataclass(frozen=True)
class Recommendation:
    ranked: List[RankedMethod] = field(default_factory=list)
    excluded: List[ExcludedMethod] = field(default_factory=list)
    message: str = ""

    @property
    def ranked_ids(self) -> List[str]:
        return [r.method_id for r in self.ranked]

    @property
    def excluded_ids(self) -> List[str]:
        return [e.method_id for e in self.excluded]

    def to_frame(self) -> pd.DataFrame:
        """机器可读结果：每个方法一行"""
        rows = [
            {
                "rank": index + 1,
                "method_id": r.method_id,
                "status": "ranked",
                "implemented": r.implemented,
                "detail": "; ".join(r.unmet) if r.unmet else r.rationale,
            }
            for index, r in enumerate(self.ranked)
        ]
        rows += [
            {"rank": "", "method_id": e.method_id, "status": "excluded", "implemented": "", "detail": e.criterion}
            for e in self.excluded
        ]
        return pd.DataFrame(rows, columns=["rank", "method_id", "status", "implemented", "detail"])

    def report(self) -> str:
        """人类可读报告"""
        lines = ["Recommended methods:"]
        if not self.ranked:
            lines.append("  (none)")
        for index, r in enumerate(self.ranked, start=1):
            flag = " [implemented]" if r.implemented else ""
            lines.append(f"  {index}. {r.method_id}{flag} - {r.rationale}")
            for item in r.unmet:
                lines.append(f"       unmet: {item}")
        lines.append("Excluded:")
        for e in self.excluded:
            lines.append(f"  - {e.method_id}: {e.criterion}")
        if self.message:
            lines.append(f"Note: {self.message}")
        return "\n".join(lines)


def parse_answers(data: dict) -> WorkflowAnswers:
    """
    校验问卷答案

    Raises:
        WorkflowAnswersError: 列出所有不合法的字段
    """
    try:
        return WorkflowAnswers.model_validate(data)
    except ValidationError as e:
        fields = sorted({".".join(str(part) for part in err["loc"][:1]) or "answers" for err in e.errors()})
        raise WorkflowAnswersError(fields) from e


def load_answers(path: Path) -> WorkflowAnswers:
    """从JSON文件读取问卷答案"""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (FileNotFoundError, json.JSONDecodeError) as e:
        raise WorkflowAnswersError([str(path)]) from e
    if not isinstance(data, dict):
        raise WorkflowAnswersError(["answers"])
    return parse_answers(data)


def _hard_failure(answers: WorkflowAnswers, record: MethodRecord) -> Optional[str]:
    if answers.step1_estimand != "any" and answers.step1_estimand not in record.estimands:
        return f"step 1 estimand: {answers.step1_estimand} not in {record.estimands}"
    if answers.step2_position not in ("any", record.position):
        return f"step 2 confounder position: method handles {record.position}"
    if answers.step3_metrics != "any" and not set(answers.step3_metrics) & set(record.metrics):
        return f"step 3 metric: method uses {record.metrics}"
    if not record.accepts_outcome(answers.step3_outcome_type):
        return f"step 3 outcome type: method handles {record.outcome_types}"
    if answers.step6_functional_classes != "no-preference" and record.functional_class not in answers.step6_functional_classes:
        return f"step 6 functional class: method is {record.functional_class}"
    return None


def _soft_unmet(answers: WorkflowAnswers, record: MethodRecord) -> List[str]:
    unmet = []
    if answers.step4_covariate_adjustment and not record.covariate_adjustment:
        unmet.append("step 4: no adjustment for observed covariates")
    u = answers.step5_confounder
    if u.want_assumption_free and record.functional_class != "assumption-free":
        unmet.append("step 5: not assumption-free")
    if not u.distribution_prior and record.distribution_assumption_on_u:
        unmet.append("step 5: needs a distributional assumption on U")
    if u.count == "multiple" and not record.multiple_confounders:
        unmet.append("step 5: models a single confounder")
    return unmet


def _rationale(record: MethodRecord) -> str:
    params = ", ".join(p.symbol for p in record.parameters) or "no sensitivity parameters"
    return f"{record.citation}; {record.functional_class}; {params}"


def recommend(answers: WorkflowAnswers, registry: Sequence[MethodRecord]) -> Recommendation:
    """
    按六步流程筛选并排序方法

    排序键：有实现者优先，其次未满足的软条件少者优先，再按年份降序，最后按id字典序。

    Args:
        answers: 问卷答案
        registry: 方法记录

    Returns:
        推荐结果
    """
    if not isinstance(answers, WorkflowAnswers):
        raise WorkflowAnswersError(["answers"])

    candidates = []
    excluded = []
    for record in registry:
        failure = _hard_failure(answers, record)
        if failure:
            excluded.append(ExcludedMethod(record.id, failure))
        else:
            candidates.append((record, _soft_unmet(answers, record)))

    candidates.sort(key=lambda item: (not item[0].implemented_here, len(item[1]), -item[0].year, item[0].id))
    ranked = [
        RankedMethod(record.id, _rationale(record), tuple(unmet), record.implemented_here)
        for record, unmet in candidates
    ]
    excluded.sort(key=lambda e: e.method_id)

    if not ranked:
        message = f"{EMPTY_MESSAGE}; {GAP_MESSAGE}"
    elif not any(r.implemented for r in ranked):
        message = GAP_MESSAGE
    else:
        message = ""
    logger.info(f"方法推荐: {len(ranked)} 个候选, {len(excluded)} 个排除")
    return Recommendation(ranked=ranked, excluded=excluded, message=message)
