"""
敏感性分析方法登记表
"""
import json
from pathlib import Path
from typing import List, Literal, Optional

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config.settings import settings
from src.utils.errors import InputError

Estimand = Literal["ACE", "CACE", "RR", "OR", "RD", "NDE", "NIE", "LATE", "multi-treatment"]
OutcomeType = Literal["binary", "continuous", "any"]
Position = Literal["treatment-outcome", "mediator-outcome", "instrument-outcome"]
Metric = Literal["risk-ratio", "odds-ratio", "partial-R2", "correlation", "probability", "coefficient", "none"]
FunctionalClass = Literal[
    "assumption-free", "parametric-linear", "parametric-nonlinear", "semiparametric", "nonparametric"
]

# 本项目有数值实现的方法
IMPLEMENTED_IDS = frozenset({"evalue", "manski", "ovb", "copula-rho", "mediation-rho", "bias-formula"})

REGISTRY_FILE = "method_registry.json"


class SensitivityParameter(BaseModel):
    """一个敏感性参数"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    symbol: str
    description: str
    metric: Metric


class MethodRecord(BaseModel):
    """一种已综述的敏感性分析方法"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    citation: str
    year: int
    estimands: List[Estimand] = Field(min_length=1)
    outcome_types: List[OutcomeType] = Field(min_length=1)
    position: Position
    parameters: List[SensitivityParameter] = Field(default_factory=list)
    functional_class: FunctionalClass
    covariate_adjustment: bool
    distribution_assumption_on_u: bool
    multiple_confounders: bool = False
    implemented_here: bool = False
    notes: str = ""

    @model_validator(mode="after")
    def _check_implemented(self) -> "MethodRecord":
        if self.implemented_here and self.id not in IMPLEMENTED_IDS:
            raise ValueError(f"record '{self.id}' cannot be marked implemented")
        return self

    @property
    def parameter_count(self) -> int:
        return len(self.parameters)

    @property
    def metrics(self) -> List[str]:
        """参数使用的度量；无参数的方法记为 none"""
        if not self.parameters:
            return ["none"]
        return sorted({p.metric for p in self.parameters})

    def accepts_outcome(self, outcome_type: str) -> bool:
        return outcome_type == "any" or "any" in self.outcome_types or outcome_type in self.outcome_types


class MethodRegistry(BaseModel):
    """带版本号的登记表文件"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    version: str
    methods: List[MethodRecord]

    @model_validator(mode="after")
    def _check_unique(self) -> "MethodRegistry":
        ids = [m.id for m in self.methods]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ValueError(f"duplicate method ids: {', '.join(duplicates)}")
        return self

    def get(self, method_id: str) -> MethodRecord:
        for method in self.methods:
            if method.id == method_id:
                return method
        raise InputError(f"unknown method id '{method_id}'")


def load_registry(path: Optional[Path] = None) -> MethodRegistry:
    """
    加载方法登记表

    Args:
        path: 登记表JSON路径，缺省为 specs/method_registry.json

    Returns:
        登记表
    """
    path = Path(path) if path else settings.SPECS_DIR / REGISTRY_FILE
    try:
        with open(path, "r", encoding="utf-8") as f:
            registry = MethodRegistry.model_validate(json.load(f))
    except FileNotFoundError as e:
        raise InputError(f"registry file not found: {path}") from e
    except (json.JSONDecodeError, ValidationError) as e:
        raise InputError(f"invalid registry file {path}: {e}") from e
    logger.debug(f"加载方法登记表 v{registry.version}: {len(registry.methods)} 条记录")
    return registry


def save_registry(registry: MethodRegistry, path: Path) -> Path:
    """保存登记表，load_registry 可无损读回"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(registry.model_dump(mode="json"), f, ensure_ascii=False, indent=2)
        f.write("\n")
    logger.info(f"登记表已保存: {path}")
    return path


def builtin_registry() -> List[MethodRecord]:
    """随项目发布的方法记录"""
    return list(load_registry().methods)
