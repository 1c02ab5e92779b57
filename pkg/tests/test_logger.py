"""
日志系统测试
"""
import sys

import pytest
from loguru import logger

from main import run
from src.utils.logger import NO_COMMAND, setup_logger


@pytest.fixture
def log_dir(tmp_path):
    """把日志写到临时目录，测试后恢复默认处理器"""
    setup_logger(level="DEBUG", log_dir=tmp_path)
    yield tmp_path
    logger.remove()
    logger.configure(extra={})
    logger.add(sys.stderr)


class TestLogger:
    """日志系统测试类"""

    def test_file_records_command(self, log_dir):
        """测试文件日志记录当前命令"""
        with logger.contextualize(command="sens evalue --rr 2"):
            logger.info("computed")
        logger.complete()
        text = (log_dir / "confsense.log").read_text(encoding="utf-8")
        assert "cmd: sens evalue --rr 2" in text
        assert "computed" in text

    def test_outside_command(self, log_dir):
        """测试命令之外的日志以 - 占位"""
        logger.info("standalone")
        text = (log_dir / "confsense.log").read_text(encoding="utf-8")
        assert f"cmd: {NO_COMMAND} |" in text

    def test_failed_command_in_error_log(self, log_dir):
        """测试失败命令的错误写入错误日志并带有命令行"""
        assert run(["sens", "evalue", "--rr", "-1"]) == 2
        errors = (log_dir / "errors.log").read_text(encoding="utf-8")
        assert "cmd: sens evalue --rr -1" in errors
        assert "DomainError" in errors

    def test_console_is_compact(self, log_dir, capsys):
        """测试控制台日志写到stderr且不含时间与源码位置"""
        setup_logger(level="DEBUG", log_dir=log_dir)
        logger.warning("short line")
        captured = capsys.readouterr()
        assert captured.out == ""
        line = captured.err.strip()
        assert line.endswith("short line")
        assert line.startswith("WARNING")
        assert "cmd:" not in line
