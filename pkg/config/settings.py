"""
项目配置文件
"""
from pathlib import Path
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """应用设置"""
    
    # 项目基础设置
    PROJECT_NAME: str = "ConfSense"
    VERSION: str = "1.0.0"
    DEBUG: bool = False
    
    # 路径设置
    BASE_DIR: Path = Path(__file__).parent.parent
    SPECS_DIR: Path = BASE_DIR / "specs"
    LOGS_DIR: Path = BASE_DIR / "logs"
    OUTPUT_DIR: Path = BASE_DIR / "output"
    
    # 模拟设置
    DEFAULT_SEED: int = 20210601
    DEFAULT_N: int = 200_000
    THREADS: int = 0  # 0 表示使用全部CPU核心
    MC_N: int = 200_000
    
    # 敏感性分析网格设置
    OVB_GRID_POINTS: int = 41
    OVB_R2_MAX: float = 0.8
    RHO_GRID_POINTS: int = 41
    RHO_MAX: float = 0.95
    MEDIATION_RHO_MAX: float = 0.9
    MEDIATION_GRID_POINTS: int = 19
    
    # 日志设置
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "{time:YYYY-MM-DD HH:mm:ss} | {level: <7} | cmd: {extra[command]} | {name}:{function}:{line} - {message}"
    LOG_CONSOLE_FORMAT: str = "<level>{level: <7}</level> {message}"
    
    class Config:
        env_file = ".env"
        env_prefix = "CONFSENSE_"
        case_sensitive = True


# 创建全局设置实例
settings = Settings()

# 确保必要的目录存在
def create_directories():
    """创建必要的目录"""
    directories = [
        settings.LOGS_DIR,
        settings.OUTPUT_DIR,
    ]
    
    for directory in directories:
        directory.mkdir(parents=True, exist_ok=True)


# 初始化时创建目录
create_directories()
