"""
测试公共夹具
"""
import pytest

from config.settings import settings
from src.scm.simulator import simulate
from src.scm.spec import build_paper_dgp

PAPER_SEED = settings.DEFAULT_SEED
PAPER_N = 200_000


@pytest.fixture(scope="session")
def paper_spec():
    """示例模型"""
    return build_paper_dgp()


@pytest.fixture(scope="session")
def paper_data(paper_spec):
    """示例模型的观测数据（20万行）"""
    return simulate(paper_spec, PAPER_N, PAPER_SEED)


@pytest.fixture(scope="session")
def paper_data_large(paper_spec):
    """示例模型的观测数据（100万行）"""
    return simulate(paper_spec, 1_000_000, PAPER_SEED)


@pytest.fixture(scope="session")
def paper_csv(tmp_path_factory, paper_spec):
    """写入磁盘的小样本数据集，供命令行测试使用"""
    from src.utils.csv_io import write_frame

    data = simulate(paper_spec, 20_000, PAPER_SEED)
    path = tmp_path_factory.mktemp("data") / "paper.csv"
    write_frame(data.to_frame(), path, "test fixture", seed=PAPER_SEED)
    return path
