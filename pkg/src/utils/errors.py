"""
异常体系

每个异常类携带命令行退出码：0 成功，1 用法错误，2 数据错误，3 数值失败。
"""
from typing import List, Optional


class ConfsenseError(Exception):
    """所有领域异常的基类"""
    exit_code: int = 3


class InputError(ConfsenseError):
    """输入不合法（退出码2）"""
    exit_code = 2


class SpecValidationError(InputError):
    """结构因果模型定义不合法

    不继承ValueError，pydantic校验器抛出时会原样传出。
    """

    def __init__(self, message: str, node: Optional[str] = None):
        self.node = node
        prefix = f"node '{node}': " if node else ""
        super().__init__(prefix + message)


class DataError(InputError):
    """数据不满足前置条件（单臂、常数结果、缺列等）"""


class DomainError(InputError):
    """参数超出数学定义域"""


class EstimandError(InputError):
    """估计量查询无法按所请求的方式回答"""


class NumericError(ConfsenseError):
    """数值计算失败（退出码3）"""
    exit_code = 3


class RankDeficiencyError(NumericError):
    """设计矩阵列不满秩"""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"rank-deficient design: column '{column}' is linearly dependent on earlier columns")


class WeakInstrumentError(NumericError):
    """第一阶段对比为零或过弱"""


class WorkflowAnswersError(ConfsenseError):
    """问卷答案格式错误（退出码1）"""
    exit_code = 1

    def __init__(self, fields: List[str]):
        self.fields = fields
        super().__init__("malformed workflow answers: " + ", ".join(fields))
