"""
日志系统模块

控制台只输出简短的进度信息到stderr（stdout留给命令结果）；文件日志额外记录
产生该条日志的命令行，便于把日志与输出文件首行对应起来。
"""
import sys
from pathlib import Path
from typing import Optional

from loguru import logger

from config.settings import settings

# 未在命令上下文中记录的日志
NO_COMMAND = "-"


def setup_logger(level: Optional[str] = None, log_dir: Optional[Path] = None):
    """
    设置日志系统

    Args:
        level: 日志级别，缺省取 settings.LOG_LEVEL
        log_dir: 日志目录，缺省取 settings.LOGS_DIR

    Returns:
        配置好的 logger
    """
    level = level or settings.LOG_LEVEL
    log_dir = Path(log_dir or settings.LOGS_DIR)

    logger.remove()
    logger.configure(extra={"command": NO_COMMAND})

    logger.add(
        sys.stderr,
        format=settings.LOG_CONSOLE_FORMAT,
        level=level,
        colorize=None,
    )

    logger.add(
        log_dir / "confsense.log",
        format=settings.LOG_FORMAT,
        level=level,
        rotation="10 MB",
        retention="30 days",
        compression="zip",
        encoding="utf-8",
    )

    # 失败的命令单独归档，便于排查退出码非0的运行
    logger.add(
        log_dir / "errors.log",
        format=settings.LOG_FORMAT,
        level="ERROR",
        rotation="5 MB",
        retention="60 days",
        compression="zip",
        encoding="utf-8",
    )

    return logger
