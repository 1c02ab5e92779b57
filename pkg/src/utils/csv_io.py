"""
输出文件写入工具

每个输出文件第一行是注释，记录版本、命令行和种子（模拟输出另记随机数算法）。
"""
from pathlib import Path
from typing import Optional

import pandas as pd
from loguru import logger

from config.settings import settings


def header_line(command: str, seed: Optional[int] = None, rng: Optional[str] = None) -> str:
    """构建输出文件的首行注释"""
    seed_text = "-" if seed is None else str(seed)
    line = f"# confsense {settings.VERSION} | cmd: {command} | seed: {seed_text}"
    if rng:
        line += f" | rng: {rng}"
    return line + "\n"


def write_frame(
    frame: pd.DataFrame,
    path: Path,
    command: str,
    seed: Optional[int] = None,
    rng: Optional[str] = None,
) -> Path:
    """
    写出CSV表格

    Args:
        frame: 待写出的表格
        path: 输出路径
        command: 生成该文件的命令（不含输出路径）
        seed: 随机种子，无随机性时为None
        rng: 随机数算法标识

    Returns:
        输出路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(header_line(command, seed, rng))
        frame.to_csv(f, index=False, lineterminator="\n")
    logger.info(f"结果已保存: {path}")
    return path


def write_text(text: str, path: Path, command: str, seed: Optional[int] = None) -> Path:
    """写出文本摘要"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(header_line(command, seed))
        f.write(text if text.endswith("\n") else text + "\n")
    logger.info(f"摘要已保存: {path}")
    return path
