"""
结构因果模型定义

节点类型：
    latent-normal     U ~ N(mean, variance)
    threshold-binary  X := 1(Φ(Σ coef·parent) > threshold)
    linear-gaussian   X ~ N(intercept + Σ coef·parent, variance)
"""
import json
import math
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Union

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.utils.errors import SpecValidationError


class LatentNormalNode(BaseModel):
    """外生正态节点"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    kind: Literal["latent-normal"] = "latent-normal"
    mean: float = 0.0
    variance: float = 1.0

    @property
    def parents(self) -> Dict[str, float]:
        return {}


class ThresholdBinaryNode(BaseModel):
    """阈值二值节点"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    kind: Literal["threshold-binary"] = "threshold-binary"
    coefficients: Dict[str, float]
    threshold: float

    @property
    def parents(self) -> Dict[str, float]:
        return self.coefficients


class LinearGaussianNode(BaseModel):
    """线性高斯节点"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    kind: Literal["linear-gaussian"] = "linear-gaussian"
    intercept: float = 0.0
    coefficients: Dict[str, float]
    variance: float = 1.0

    @property
    def parents(self) -> Dict[str, float]:
        return self.coefficients


NodeDef = Annotated[
    Union[LatentNormalNode, ThresholdBinaryNode, LinearGaussianNode],
    Field(discriminator="kind"),
]


class ScmSpec(BaseModel):
    """按拓扑顺序排列的节点列表"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = ""
    nodes: List[NodeDef]

    @model_validator(mode="after")
    def _check_structure(self) -> "ScmSpec":
        validate_spec(self)
        return self

    @property
    def node_names(self) -> List[str]:
        return [node.name for node in self.nodes]

    def node(self, name: str):
        for node in self.nodes:
            if node.name == name:
                return node
        raise SpecValidationError("unknown node", node=name)

    def index_of(self, name: str) -> int:
        self.node(name)
        return self.node_names.index(name)

    def children(self, name: str) -> Dict[str, float]:
        """返回子节点及对应边系数"""
        return {
            node.name: node.parents[name]
            for node in self.nodes
            if name in node.parents
        }

    def with_coefficient(self, node: str, parent: str, value: float) -> "ScmSpec":
        """
        返回修改了一条边系数的新模型

        Args:
            node: 子节点名
            parent: 父节点名（必须已是该节点的父节点）
            value: 新系数

        Returns:
            新的模型定义
        """
        target = self.node(node)
        if parent not in target.parents:
            raise SpecValidationError(f"'{parent}' is not a parent", node=node)
        data = self.model_dump()
        for entry in data["nodes"]:
            if entry["name"] == node:
                entry["coefficients"][parent] = float(value)
        return ScmSpec.model_validate(data)


def validate_spec(spec: ScmSpec) -> None:
    """
    检查模型是否为合法的有向无环图，且参数取值合法

    Args:
        spec: 模型定义

    Raises:
        SpecValidationError: 指明出错节点
    """
    seen = set()
    for node in spec.nodes:
        if not node.name or not node.name.strip():
            raise SpecValidationError("node names must be non-empty", node=node.name)
        if node.name in seen:
            raise SpecValidationError("duplicate node name", node=node.name)
        for parent, coef in node.parents.items():
            if parent == node.name:
                raise SpecValidationError("node lists itself as a parent", node=node.name)
            if parent not in seen:
                raise SpecValidationError(
                    f"parent '{parent}' does not precede the node in topological order", node=node.name
                )
            if not math.isfinite(coef):
                raise SpecValidationError(f"coefficient on '{parent}' is not finite", node=node.name)
        if isinstance(node, (LatentNormalNode, LinearGaussianNode)):
            if not math.isfinite(node.variance) or node.variance <= 0:
                raise SpecValidationError("variance must be > 0", node=node.name)
        if isinstance(node, LatentNormalNode) and not math.isfinite(node.mean):
            raise SpecValidationError("mean must be finite", node=node.name)
        if isinstance(node, LinearGaussianNode) and not math.isfinite(node.intercept):
            raise SpecValidationError("intercept must be finite", node=node.name)
        if isinstance(node, ThresholdBinaryNode):
            if not 0.0 < node.threshold < 1.0:
                raise SpecValidationError("threshold must lie in (0, 1)", node=node.name)
            if not node.coefficients:
                raise SpecValidationError("threshold-binary node needs at least one parent", node=node.name)
        seen.add(node.name)


def build_paper_dgp() -> ScmSpec:
    """
    构建三种未观测混杂并存的线性示例模型

    U_IY, U_AY, U_MY ~ N(0, 1)
    I := 1(Φ(U_IY) > 0.6)
    A := 1(Φ(I + U_AY) > 0.7)
    M ~ N(-1.5A + 1.5U_MY, 1)
    Y ~ N(3A + 2M + 1.5U_IY + U_AY - 1.5U_MY, 1)

    Returns:
        模型定义
    """
    return ScmSpec(
        name="paper_dgp",
        nodes=[
            LatentNormalNode(name="U_IY", mean=0.0, variance=1.0),
            LatentNormalNode(name="U_AY", mean=0.0, variance=1.0),
            LatentNormalNode(name="U_MY", mean=0.0, variance=1.0),
            ThresholdBinaryNode(name="I", coefficients={"U_IY": 1.0}, threshold=0.6),
            ThresholdBinaryNode(name="A", coefficients={"I": 1.0, "U_AY": 1.0}, threshold=0.7),
            LinearGaussianNode(name="M", intercept=0.0, coefficients={"A": -1.5, "U_MY": 1.5}, variance=1.0),
            LinearGaussianNode(
                name="Y",
                intercept=0.0,
                coefficients={"A": 3.0, "M": 2.0, "U_IY": 1.5, "U_AY": 1.0, "U_MY": -1.5},
                variance=1.0,
            ),
        ],
    )


def load_spec(path: Path) -> ScmSpec:
    """
    从JSON文件加载模型定义

    Args:
        path: 文件路径

    Returns:
        模型定义
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise SpecValidationError(f"spec file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise SpecValidationError(f"spec file is not valid JSON: {e}") from e

    try:
        spec = ScmSpec.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        node = _node_name_for_error(data, first.get("loc", ()))
        raise SpecValidationError(f"{first.get('msg')} at {'.'.join(map(str, first.get('loc', ())))}", node=node) from e

    logger.info(f"加载模型定义: {path} ({len(spec.nodes)} 个节点)")
    return spec


def save_spec(spec: ScmSpec, path: Path) -> Path:
    """保存模型定义为JSON"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(spec.model_dump(mode="json"), f, ensure_ascii=False, indent=2)
        f.write("\n")
    logger.info(f"模型定义已保存: {path}")
    return path


def _node_name_for_error(data, loc) -> Union[str, None]:
    if len(loc) >= 2 and loc[0] == "nodes" and isinstance(loc[1], int):
        try:
            return data["nodes"][loc[1]].get("name")
        except (KeyError, IndexError, AttributeError, TypeError):
            return None
    return None
