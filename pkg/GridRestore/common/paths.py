# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
import os
import platform
from pathlib import Path

__all__ = ["bundled_configs_dir", "bundled_feeders_dir", "cache_dir", "config_dir", "log_dir", "resolve_feeder_path", "res_dir"]
csidl = {
    "roaming_appdata": 26,
    "local_appdata": 28,
}


def get_win_path(csidl: int) -> Path:
    """获取windows系统中的特殊路径(当前路径,非默认)"""
    if platform.system() == "Windows":
        import ctypes.wintypes

        buffer = ctypes.create_unicode_buffer(ctypes.wintypes.MAX_PATH)
        ctypes.windll.shell32.SHGetFolderPathW(None, csidl, None, 0, buffer)
        return Path(buffer.value)
    msg = "get_win_path() is only available on Windows"
    raise OSError(msg)


match platform.system():
    case "Linux":
        home = Path.home()
        # XDG Base Directory
        config_dir = home / ".config" / "GridRestore"
        cache_dir = home / ".cache" / "GridRestore"
        log_dir = home / ".local" / "share" / "GridRestore" / "logs"
    case "Darwin":  # macOS
        home = Path.home()
        config_dir = home / "Library" / "Preferences" / "GridRestore"
        cache_dir = home / "Library" / "Caches" / "GridRestore"
        log_dir = home / "Library" / "Logs" / "GridRestore"
    case "Windows":
        config_dir = get_win_path(csidl["roaming_appdata"]) / "GridRestore"
        cache_dir = get_win_path(csidl["local_appdata"]) / "GridRestore" / "Cache"
        log_dir = get_win_path(csidl["local_appdata"]) / "GridRestore" / "Logs"
    case _:
        msg = f"Unsupported platform: {platform.system()}"
        raise OSError(msg)

# 环境变量覆盖(测试与CI使用)
config_dir = Path(os.environ.get("GRIDRESTORE_CONFIG_DIR", config_dir))
cache_dir = Path(os.environ.get("GRIDRESTORE_CACHE_DIR", cache_dir))
log_dir = Path(os.environ.get("GRIDRESTORE_LOG_DIR", log_dir))

res_dir = Path(__file__).resolve().parent.parent / "res"
bundled_feeders_dir = res_dir / "feeders"
bundled_configs_dir = res_dir / "configs"


def create_directories(dirs: list[Path]) -> None:
    for directory in dirs:
        directory.mkdir(parents=True, exist_ok=True)


create_directories([config_dir, cache_dir, log_dir])


def resolve_feeder_path(feeder: str | Path, base_dir: Path | None = None) -> Path:
    """将馈线名称或路径解析为文件路径

    依次尝试: 绝对路径/当前目录, 相对于base_dir(通常为运行配置文件所在目录), 内置馈线名称(如"toy13")
    """
    path = Path(feeder)
    candidates = [path]
    if base_dir is not None and not path.is_absolute():
        candidates.append(base_dir / path)
    candidates.append(bundled_feeders_dir / f"{feeder}.json")
    for candidate in candidates:
        if candidate.is_file():
            return candidate
    # 找不到时返回原始路径,由调用方报告不存在
    return path
