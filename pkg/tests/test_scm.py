"""
结构因果模型与模拟器测试
"""
import json
import math

import numpy as np
import pytest
from scipy.stats import norm

from config.settings import Settings, settings
from src.scm.simulator import CHUNK_SIZE, draw_noise, rng_algorithm, simulate
from src.scm.spec import (
    LatentNormalNode,
    LinearGaussianNode,
    ScmSpec,
    ThresholdBinaryNode,
    build_paper_dgp,
    load_spec,
    save_spec,
)
from src.utils.errors import DomainError, SpecValidationError

SEED = 20210601


def _p_treated() -> float:
    """P(A=1)：对I的两个取值求和"""
    cut = norm.ppf(0.7)
    return 0.6 * (1.0 - norm.cdf(cut)) + 0.4 * (1.0 - norm.cdf(cut - 1.0))


class TestScmSpec:
    """模型定义测试类"""

    def setup_method(self):
        """测试前设置"""
        self.spec = build_paper_dgp()

    def test_reference_model_structure(self):
        """测试示例模型的节点顺序与边"""
        assert self.spec.node_names == ["U_IY", "U_AY", "U_MY", "I", "A", "M", "Y"]
        assert self.spec.children("A") == {"M": -1.5, "Y": 3.0}
        assert self.spec.index_of("Y") == 6

    def test_duplicate_name_rejected(self):
        """测试重复节点名"""
        with pytest.raises(SpecValidationError) as info:
            ScmSpec(nodes=[LatentNormalNode(name="U"), LatentNormalNode(name="U")])
        assert info.value.node == "U"

    def test_parent_order_rejected(self):
        """测试父节点出现在子节点之后（包括环）"""
        with pytest.raises(SpecValidationError) as info:
            ScmSpec(nodes=[
                LinearGaussianNode(name="X", coefficients={"Z": 1.0}),
                LatentNormalNode(name="Z"),
            ])
        assert info.value.node == "X"

    def test_self_loop_rejected(self):
        """测试自环"""
        with pytest.raises(SpecValidationError):
            ScmSpec(nodes=[LinearGaussianNode(name="X", coefficients={"X": 1.0})])

    @pytest.mark.parametrize("threshold", [0.0, 1.0, 1.5, -0.2])
    def test_threshold_domain(self, threshold):
        """测试阈值必须在(0,1)内"""
        with pytest.raises(SpecValidationError) as info:
            ScmSpec(nodes=[
                LatentNormalNode(name="U"),
                ThresholdBinaryNode(name="T", coefficients={"U": 1.0}, threshold=threshold),
            ])
        assert info.value.node == "T"

    @pytest.mark.parametrize("variance", [0.0, -1.0])
    def test_variance_domain(self, variance):
        """测试方差必须为正"""
        with pytest.raises(SpecValidationError):
            ScmSpec(nodes=[LatentNormalNode(name="U", variance=variance)])

    def test_with_coefficient(self):
        """测试修改单条边系数"""
        restored = self.spec.with_coefficient("Y", "U_IY", 0.0)
        assert restored.node("Y").coefficients["U_IY"] == 0.0
        assert self.spec.node("Y").coefficients["U_IY"] == 1.5
        with pytest.raises(SpecValidationError):
            self.spec.with_coefficient("Y", "I", 1.0)

    def test_shipped_spec_round_trip(self, tmp_path):
        """测试随附的模型文件load→save→load保持不变"""
        shipped = settings.SPECS_DIR / "paper_dgp.json"
        loaded = load_spec(shipped)
        assert loaded == self.spec

        out = save_spec(loaded, tmp_path / "copy.json")
        assert load_spec(out) == loaded
        assert out.read_text(encoding="utf-8") == shipped.read_text(encoding="utf-8")

    def test_load_invalid_json(self, tmp_path):
        """测试无效JSON"""
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(SpecValidationError):
            load_spec(path)

    def test_load_unknown_kind(self, tmp_path):
        """测试未知节点类型，错误信息指明节点"""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"name": "x", "nodes": [{"name": "Q", "kind": "poisson"}]}), encoding="utf-8")
        with pytest.raises(SpecValidationError) as info:
            load_spec(path)
        assert info.value.node == "Q"

    def test_load_cycle(self, tmp_path):
        """测试文件中的环"""
        data = {
            "name": "cycle",
            "nodes": [
                {"name": "X", "kind": "linear-gaussian", "coefficients": {"Y": 1.0}},
                {"name": "Y", "kind": "linear-gaussian", "coefficients": {"X": 1.0}},
            ],
        }
        path = tmp_path / "cycle.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        with pytest.raises(SpecValidationError):
            load_spec(path)


class TestSimulator:
    """模拟器测试类"""

    def setup_method(self):
        """测试前设置"""
        self.spec = build_paper_dgp()

    def test_columns_and_metadata(self):
        """测试列顺序与元数据"""
        data = simulate(self.spec, 1000, SEED)
        assert data.names == self.spec.node_names
        assert data.n == 1000
        assert data.metadata["rng"] == rng_algorithm()
        assert data.metadata["seed"] == str(SEED)

    def test_chunk_size_is_fixed(self, monkeypatch):
        """测试行块大小固定为4096，环境变量无法改写"""
        assert rng_algorithm() == "philox4x64/seedseq-spawn/chunk4096"
        reference = simulate(self.spec, CHUNK_SIZE + 5, SEED)
        monkeypatch.setenv("CONFSENSE_CHUNK_SIZE", "8")
        assert not hasattr(Settings(), "CHUNK_SIZE")
        assert rng_algorithm() == "philox4x64/seedseq-spawn/chunk4096"
        again = simulate(self.spec, CHUNK_SIZE + 5, SEED)
        for name in reference.names:
            assert np.array_equal(reference[name], again[name])

    def test_zero_rows(self):
        """测试n=0返回空表"""
        data = simulate(self.spec, 0, SEED)
        assert data.n == 0
        assert data.names == self.spec.node_names

    def test_negative_n(self):
        """测试负样本量"""
        with pytest.raises(DomainError):
            simulate(self.spec, -1, SEED)

    def test_same_seed_identical(self):
        """测试相同种子结果逐位一致"""
        first = simulate(self.spec, 5000, SEED)
        second = simulate(self.spec, 5000, SEED)
        for name in first.names:
            assert np.array_equal(first[name], second[name])

    def test_thread_count_invariance(self):
        """测试线程数不影响结果（行数不是行块整数倍）"""
        n = 3 * CHUNK_SIZE + 17
        single = simulate(self.spec, n, SEED, threads=1)
        multi = simulate(self.spec, n, SEED, threads=4)
        for name in single.names:
            assert np.array_equal(single[name], multi[name])

    def test_prefix_stability(self):
        """测试较小样本是较大样本的前缀"""
        small = simulate(self.spec, 5000, SEED)
        large = simulate(self.spec, 9000, SEED)
        for name in small.names:
            assert np.array_equal(small[name], large[name][:5000])

    def test_different_seed_differs(self):
        """测试不同种子给出不同样本"""
        first = simulate(self.spec, 100, SEED)
        second = simulate(self.spec, 100, SEED + 1)
        assert not np.array_equal(first["U_IY"], second["U_IY"])

    def test_binary_nodes(self, paper_data):
        """测试二值节点只取0和1"""
        for name in ("I", "A"):
            values = paper_data[name]
            assert set(np.unique(values)) <= {0.0, 1.0}

    def test_threshold_equivalence(self, paper_data):
        """测试Φ(index) > q 与 index > Φ⁻¹(q) 一致"""
        expected_i = (paper_data["U_IY"] > norm.ppf(0.6)).astype(float)
        expected_a = (paper_data["I"] + paper_data["U_AY"] > norm.ppf(0.7)).astype(float)
        assert np.array_equal(paper_data["I"], expected_i)
        assert np.array_equal(paper_data["A"], expected_a)

    def test_latent_moments(self, paper_data):
        """测试潜变量均值在4个标准误内"""
        bound = 4.0 / math.sqrt(paper_data.n)
        for name in ("U_IY", "U_AY", "U_MY"):
            assert abs(float(np.mean(paper_data[name]))) < bound

    def test_instrument_probability(self, paper_data):
        """测试P(I=1)=0.4"""
        p_hat = float(np.mean(paper_data["I"]))
        se = math.sqrt(0.4 * 0.6 / paper_data.n)
        assert abs(p_hat - 0.4) < 3 * se

    @pytest.mark.slow
    def test_treatment_probability(self, paper_data_large):
        """测试P(A=1)约为0.45313"""
        p = _p_treated()
        assert p == pytest.approx(0.45313, abs=1e-5)
        p_hat = float(np.mean(paper_data_large["A"]))
        se = math.sqrt(p * (1 - p) / paper_data_large.n)
        assert abs(p_hat - p) < 3 * se

    def test_intervention_keeps_noise(self):
        """测试do-干预固定节点且不改变外生变量"""
        observed = simulate(self.spec, 2000, SEED)
        treated = simulate(self.spec, 2000, SEED, interventions={"A": 1.0})
        assert np.all(treated["A"] == 1.0)
        for name in ("U_IY", "U_AY", "U_MY", "I"):
            assert np.array_equal(observed[name], treated[name])

    def test_intervention_unknown_node(self):
        """测试干预不存在的节点"""
        with pytest.raises(SpecValidationError):
            simulate(self.spec, 10, SEED, interventions={"Q": 1.0})

    def test_threshold_nodes_have_no_noise(self):
        """测试阈值节点不消耗噪声"""
        noise = draw_noise(self.spec, 10, SEED)
        assert set(noise) == {"U_IY", "U_AY", "U_MY", "M", "Y"}

    def test_invalid_seed(self):
        """测试超出64位范围的种子"""
        with pytest.raises(DomainError):
            simulate(self.spec, 10, -1)
