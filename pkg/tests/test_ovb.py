"""
遗漏变量偏倚敏感性分析测试
"""
import math

import numpy as np
import pytest

from src.data.table import DataTable
from src.estimators.ols import OlsFit, ols
from src.sensitivity.ovb import (
    OvbParams,
    adjusted_estimate,
    adjusted_se,
    adjusted_t,
    bias_magnitude,
    contour_grid,
    robustness_value,
)
from src.utils.errors import DomainError


def _random_dataset(rng: np.random.Generator, n: int = 500) -> DataTable:
    x = rng.normal(size=n)
    u = 0.5 * x + rng.normal(size=n)
    a = rng.uniform(-1, 1) * x + rng.uniform(-1, 1) * u + rng.normal(size=n)
    y = rng.uniform(-2, 2) * a + 0.5 * x + rng.uniform(-2, 2) * u + rng.normal(size=n)
    return DataTable({"X": x, "U": u, "A": a, "Y": y})


def _fake_fit(coefficient: float, se: float, df: int = 100) -> OlsFit:
    t = coefficient / se
    return OlsFit(
        outcome="Y",
        regressors=["A"],
        coefficients={"(Intercept)": 0.0, "A": coefficient},
        std_errors={"(Intercept)": 1.0, "A": se},
        t_values={"(Intercept)": 0.0, "A": t},
        residual_sd=1.0,
        df=df,
        r2=0.0,
        n=df + 2,
        residuals=np.zeros(df + 2),
    )


class TestOmittedVariableBias:
    """遗漏变量偏倚测试类"""

    def setup_method(self):
        """测试前设置"""
        self.rng = np.random.default_rng(99)

    def test_exact_identity(self):
        """测试用真实偏R²调整后恰好得到包含U的回归系数"""
        for _ in range(50):
            data = _random_dataset(self.rng)
            restricted = ols(data, "Y", ["A", "X"])
            full = ols(data, "Y", ["A", "X", "U"])
            treatment_model = ols(data, "A", ["X", "U"])
            params = OvbParams(r2_yu=full.partial_r2("U"), r2_au=treatment_model.partial_r2("U"))
            direction = 1 if restricted.coefficient("A") >= full.coefficient("A") else -1

            adjusted = adjusted_estimate(restricted, "A", params, direction)
            expected = full.coefficient("A")
            assert abs(adjusted - expected) <= 1e-8 * max(1.0, abs(expected))

    def test_zero_strength(self):
        """测试混杂强度为0时不调整"""
        fit = _fake_fit(1.2, 0.3)
        assert adjusted_estimate(fit, "A", OvbParams(0.0, 0.0)) == 1.2
        assert bias_magnitude(fit, "A", OvbParams(0.5, 0.0)) == 0.0

    def test_direction(self):
        """测试方向参数"""
        fit = _fake_fit(1.0, 0.1)
        params = OvbParams(0.1, 0.2)
        up = adjusted_estimate(fit, "A", params, direction=-1)
        down = adjusted_estimate(fit, "A", params, direction=1)
        assert up - 1.0 == pytest.approx(1.0 - down)
        with pytest.raises(DomainError):
            adjusted_estimate(fit, "A", params, direction=0)

    def test_adjusted_se_and_t(self):
        """测试调整后标准误与t统计量"""
        fit = _fake_fit(1.0, 0.1, df=50)
        params = OvbParams(0.2, 0.3)
        se = adjusted_se(fit, "A", params)
        assert se == pytest.approx(0.1 * math.sqrt(0.8 / 0.7) * math.sqrt(50 / 49))
        assert adjusted_t(fit, "A", params) == pytest.approx(adjusted_estimate(fit, "A", params) / se)

    def test_singular_r2(self):
        """测试 R²_au = 1 时公式奇异"""
        with pytest.raises(DomainError, match="singular"):
            OvbParams(r2_yu=0.1, r2_au=1.0)
        with pytest.raises(DomainError):
            OvbParams(r2_yu=-0.1, r2_au=0.1)

    @pytest.mark.parametrize("q", [0.25, 0.5, 1.0])
    def test_robustness_value_self_consistent(self, q):
        """测试两个偏R²都取RV_q时估计恰好缩小比例q"""
        data = _random_dataset(self.rng, n=2000)
        fit = ols(data, "Y", ["A", "X"])
        rv = robustness_value(fit, "A", q)
        estimate = fit.coefficient("A")
        direction = 1 if estimate >= 0 else -1
        adjusted = adjusted_estimate(fit, "A", OvbParams(rv, rv), direction)
        assert adjusted == pytest.approx((1 - q) * estimate, rel=1e-8, abs=1e-10)

    def test_robustness_value_zero_t(self):
        """测试t=0时稳健值为0"""
        assert robustness_value(_fake_fit(0.0, 0.5), "A") == 0.0

    def test_robustness_value_monotone_in_q(self):
        """测试稳健值随q递增"""
        fit = _fake_fit(0.8, 0.1)
        values = [robustness_value(fit, "A", q) for q in (0.1, 0.4, 0.7, 1.0)]
        assert np.all(np.diff(values) > 0)
        with pytest.raises(DomainError):
            robustness_value(fit, "A", 0.0)

    def test_robustness_value_monotone_in_t(self):
        """测试固定自由度时稳健值随|t|严格递增，且与t的符号无关"""
        t_values = np.geomspace(0.01, 1000.0, 200)
        values = [robustness_value(_fake_fit(t * 0.1, 0.1), "A") for t in t_values]
        assert np.all(np.diff(values) > 0)
        for t, value in zip(t_values[::20], values[::20]):
            assert robustness_value(_fake_fit(-t * 0.1, 0.1), "A") == value

    def test_robustness_value_below_one_for_near_perfect_fit(self):
        """测试近乎完美拟合（|t|极大）时稳健值仍严格小于1"""
        for coefficient, se in ((1.0, 1e-12), (1.0, 1e-200), (1.0, 1e-300)):
            rv = robustness_value(_fake_fit(coefficient, se), "A")
            assert 0.0 < rv < 1.0
            OvbParams(rv, rv)

    def test_robustness_value_near_perfect_ols(self):
        """测试 y = 2x + 1e-9·sin(x) 的回归上稳健值落在 [0, 1)"""
        x = np.linspace(-3.0, 3.0, 200)
        data = DataTable({"A": x, "Y": 2.0 * x + 1e-9 * np.sin(x)})
        fit = ols(data, "Y", ["A"])
        rv = robustness_value(fit, "A")
        assert 0.0 <= rv < 1.0
        grid = contour_grid(fit, "A", 3, 0.5)
        assert [m.label for m in grid.markers] == ["unadjusted", "robustness-value"]

    def test_outcome_rescaling(self):
        """测试结果乘以2时调整后估计加倍、稳健值不变"""
        data = _random_dataset(self.rng)
        doubled = data.with_column("Y", 2.0 * data["Y"])
        fit = ols(data, "Y", ["A", "X"])
        fit2 = ols(doubled, "Y", ["A", "X"])
        params = OvbParams(0.1, 0.2)
        assert adjusted_estimate(fit2, "A", params) == pytest.approx(2.0 * adjusted_estimate(fit, "A", params), rel=1e-12)
        assert robustness_value(fit2, "A") == pytest.approx(robustness_value(fit, "A"), rel=1e-12)


class TestContourGrid:
    """敏感性网格测试类"""

    def test_origin_is_unadjusted(self, paper_data):
        """测试网格原点等于未调整估计"""
        fit = ols(paper_data, "Y", ["A"])
        grid = contour_grid(fit, "A", 9, 0.8)
        assert grid.estimates[0, 0] == fit.coefficient("A")
        assert grid.estimates.shape == (9, 9)

    def test_monotone_slices(self, paper_data):
        """测试方向为+1时估计沿两个轴不增"""
        grid = contour_grid(ols(paper_data, "Y", ["A"]), "A", 11, 0.8)
        assert grid.direction == 1
        assert np.all(np.diff(grid.estimates, axis=0) <= 1e-12)
        assert np.all(np.diff(grid.estimates, axis=1) <= 1e-12)

    def test_reference_model_sign_change(self, paper_data):
        """测试示例数据上存在零等值线，稳健值约0.30"""
        fit = ols(paper_data, "Y", ["A"])
        grid = contour_grid(fit, "A", 41, 0.8)
        assert grid.has_sign_change()
        assert float(np.min(grid.estimates)) <= 0.0
        assert 0.0 < robustness_value(fit, "A") < 0.8

    def test_tiny_grid(self):
        """测试r2_max很小时整张网格约等于未调整估计"""
        fit = _fake_fit(1.5, 0.2)
        grid = contour_grid(fit, "A", 2, 1e-9)
        assert np.allclose(grid.estimates, 1.5, atol=1e-6)

    def test_markers_and_frame(self):
        """测试标记点与长表"""
        fit = _fake_fit(1.0, 0.1)
        grid = contour_grid(fit, "A", 5, 0.5)
        labels = [m.label for m in grid.markers]
        assert labels == ["unadjusted", "robustness-value"]
        assert grid.markers[1].adjusted_estimate == pytest.approx(0.0, abs=1e-10)

        frame = grid.to_frame()
        assert list(frame.columns) == ["r2_au", "r2_yu", "adjusted_estimate", "adjusted_t", "kind"]
        assert len(frame) == 25 + 5 + 2
        assert set(frame["kind"]) == {"grid", "extreme", "marker:unadjusted", "marker:robustness-value"}

    def test_invalid_arguments(self):
        """测试非法参数"""
        fit = _fake_fit(1.0, 0.1)
        with pytest.raises(DomainError):
            contour_grid(fit, "A", 1, 0.5)
        with pytest.raises(DomainError):
            contour_grid(fit, "A", 5, 1.0)
