"""
离散混杂偏倚分解测试
"""
import numpy as np
import pandas as pd
import pytest

from src.sensitivity.bias_formulas import (
    DiscreteJoint,
    confounding_bias,
    joint_from_distribution,
    joint_from_frame,
    joint_from_table,
    tau_adjusted,
    tau_star,
)
from src.utils.errors import DataError, DomainError


def _random_cells(rng: np.random.Generator):
    """随机生成全部格子为正概率的 (P, E[Y]) 数组，形状 (nx, nu, 2)"""
    nx = int(rng.integers(1, 5))
    nu = int(rng.integers(1, 5))
    p = rng.dirichlet(np.ones(nx * nu * 2)).reshape(nx, nu, 2)
    ey = rng.normal(scale=3.0, size=(nx, nu, 2))
    return p, ey


def _to_joint(p: np.ndarray, ey: np.ndarray, order=None, u_names=None) -> DiscreteJoint:
    nx, nu, _ = p.shape
    u_names = u_names or [f"u{j}" for j in range(nu)]
    cells = [(i, j, a) for i in range(nx) for j in range(nu) for a in (0, 1)]
    if order is not None:
        cells = [cells[k] for k in order]
    probabilities = {(f"x{i}", u_names[j], a): float(p[i, j, a]) for i, j, a in cells}
    means = {(f"x{i}", u_names[j], a): float(ey[i, j, a]) for i, j, a in cells}
    return DiscreteJoint(probabilities, means)


def _enumerate_tau(p: np.ndarray, ey: np.ndarray) -> float:
    return float(np.sum((ey[:, :, 1] - ey[:, :, 0]) * p.sum(axis=2)))


def _enumerate_tau_star(p: np.ndarray, ey: np.ndarray) -> float:
    p_x = p.sum(axis=(1, 2))
    m1 = (ey[:, :, 1] * p[:, :, 1]).sum(axis=1) / p[:, :, 1].sum(axis=1)
    m0 = (ey[:, :, 0] * p[:, :, 0]).sum(axis=1) / p[:, :, 0].sum(axis=1)
    return float(np.sum((m1 - m0) * p_x))


class TestBiasDecomposition:
    """偏倚分解测试类"""

    def setup_method(self):
        """测试前设置"""
        self.rng = np.random.default_rng(2024)

    def test_matches_enumeration(self):
        """测试200个随机联合分布与直接枚举一致"""
        for _ in range(200):
            p, ey = _random_cells(self.rng)
            joint = _to_joint(p, ey)
            tau = _enumerate_tau(p, ey)
            star = _enumerate_tau_star(p, ey)
            assert tau_adjusted(joint) == pytest.approx(tau, abs=1e-12)
            assert tau_star(joint) == pytest.approx(star, abs=1e-12)
            assert confounding_bias(joint) == pytest.approx(star - tau, abs=1e-12)

    def test_label_permutation_invariance(self):
        """测试格子顺序与U标签重命名不改变结果"""
        for _ in range(50):
            p, ey = _random_cells(self.rng)
            base = _to_joint(p, ey)
            order = self.rng.permutation(p.size)
            renamed = [f"level-{k}" for k in self.rng.permutation(p.shape[1])]
            shuffled = _to_joint(p, ey, order=order, u_names=renamed)
            assert tau_adjusted(shuffled) == tau_adjusted(base)
            assert tau_star(shuffled) == tau_star(base)
            assert confounding_bias(shuffled) == confounding_bias(base)

    def test_outcome_scaling(self):
        """测试结果乘以2时三个量都精确加倍"""
        for _ in range(50):
            p, ey = _random_cells(self.rng)
            base = _to_joint(p, ey)
            scaled = _to_joint(p, 2.0 * ey)
            assert tau_adjusted(scaled) == 2.0 * tau_adjusted(base)
            assert tau_star(scaled) == 2.0 * tau_star(base)
            assert confounding_bias(scaled) == 2.0 * confounding_bias(base)

    def test_single_confounder_level(self):
        """测试U只有一个水平时偏倚恰为0"""
        for _ in range(50):
            p, ey = _random_cells(self.rng)
            joint = _to_joint(p[:, :1, :] / p[:, :1, :].sum(), ey[:, :1, :])
            assert confounding_bias(joint) == 0.0

    def test_unconfounded_treatment(self):
        """测试给定X时U与A独立则偏倚为0"""
        p_x = np.array([0.3, 0.7])
        p_u = np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]])
        p_a = np.array([0.25, 0.6])
        p = np.empty((2, 3, 2))
        for i in range(2):
            for j in range(3):
                p[i, j, 1] = p_x[i] * p_u[i, j] * p_a[i]
                p[i, j, 0] = p_x[i] * p_u[i, j] * (1 - p_a[i])
        ey = self.rng.normal(size=(2, 3, 2))
        joint = _to_joint(p / p.sum(), ey)
        assert confounding_bias(joint) == pytest.approx(0.0, abs=1e-12)

    def test_constant_outcome(self):
        """测试结果均值处处相同时两个效应都为0"""
        p, _ = _random_cells(self.rng)
        joint = _to_joint(p, np.full(p.shape, 4.0))
        assert tau_adjusted(joint) == pytest.approx(0.0, abs=1e-12)
        assert tau_star(joint) == pytest.approx(0.0, abs=1e-12)

    def test_positivity_violation(self):
        """测试某层缺少处理水平"""
        joint = DiscreteJoint(
            {("x", "u0", 1): 0.0, ("x", "u0", 0): 0.5, ("x", "u1", 1): 0.25, ("x", "u1", 0): 0.25},
            {("x", "u0", 0): 1.0, ("x", "u1", 1): 2.0, ("x", "u1", 0): 0.5},
        )
        with pytest.raises(DomainError, match="positivity"):
            tau_adjusted(joint)
        assert tau_star(joint) == pytest.approx(2.0 - (1.0 * 2 / 3 + 0.5 / 3))

    def test_mass_must_sum_to_one(self):
        """测试概率和不为1"""
        with pytest.raises(DataError):
            DiscreteJoint({("x", "u", 0): 0.4, ("x", "u", 1): 0.5}, {("x", "u", 0): 0.0, ("x", "u", 1): 1.0})

    def test_missing_mean(self):
        """测试正概率格子缺少结果均值"""
        with pytest.raises(DataError):
            DiscreteJoint({("x", "u", 0): 0.5, ("x", "u", 1): 0.5}, {("x", "u", 0): 0.0})

    def test_unknown_treatment_level(self):
        """测试处理水平不在 {a0, a1} 中"""
        with pytest.raises(DataError):
            DiscreteJoint({("x", "u", 2): 1.0}, {("x", "u", 2): 0.0})


class TestJointConstructors:
    """联合分布构建测试类"""

    def test_from_distribution(self):
        """测试由完整分布推出条件均值"""
        pmf = {
            ("x", "u", 0, 0.0): 0.1,
            ("x", "u", 0, 2.0): 0.3,
            ("x", "u", 1, 1.0): 0.2,
            ("x", "u", 1, 5.0): 0.4,
        }
        joint = joint_from_distribution(pmf)
        assert joint.p("x", "u", 0) == pytest.approx(0.4)
        assert joint.mean("x", "u", 0) == pytest.approx(1.5)
        assert joint.mean("x", "u", 1) == pytest.approx(11.0 / 3.0)

    def test_from_frame(self):
        """测试从五列表格构建"""
        frame = pd.DataFrame({
            "x": ["a", "a", "a", "a"],
            "u": ["lo", "lo", "hi", "hi"],
            "a": [0, 1, 0, 1],
            "p": [0.25, 0.25, 0.25, 0.25],
            "ey": [0.0, 1.0, 2.0, 4.0],
        })
        joint = joint_from_frame(frame)
        assert tau_adjusted(joint) == pytest.approx(1.5)
        assert confounding_bias(joint) == pytest.approx(0.0)

    def test_from_frame_missing_column(self):
        """测试缺列"""
        with pytest.raises(DataError):
            joint_from_frame(pd.DataFrame({"x": [1], "u": [1], "a": [0], "p": [1.0]}))

    def test_discretized_reference_slice(self, paper_data):
        """测试示例数据按U_AY符号离散化后偏倚为正"""
        data = paper_data.with_column("U_sign", (paper_data["U_AY"] > 0).astype(float))
        joint = joint_from_table(data, "A", "Y", "U_sign")
        assert confounding_bias(joint) > 0
