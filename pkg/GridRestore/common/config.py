# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""用户设置管理模块

这个模块提供了:
- 用户级设置(日志级别、缓存开关、并行任务数)的读写
运行配置(RunConfig)见 GridRestore.common.models
"""

import json
import sys
from threading import Lock
from typing import Any

from GridRestore.common.paths import config_dir


class Config(dict):
    """GridRestore的用户设置类

    1. 使用Lock保证线程安全
    2. 使用方法类似字典
    3. 使用json格式存储配置文件
    注意: 由于Lock导致这个类并不高效,不应该在训练循环等需要高性能的地方使用
    """

    def __init__(self) -> None:
        self.lock = None
        self.config_path = config_dir / "config.json"

        self.default_cfg = {
            "log_level": "INFO",
            "oracle_cache": True,
            "max_workers": None,
        }

        super().__init__(self.default_cfg)
        self.lock = Lock()
        self.load()

    def load(self) -> None:
        """加载配置文件"""
        with self.lock:
            if self.config_path.exists():
                try:
                    with self.config_path.open(encoding="utf-8") as f:
                        data = json.load(f)
                    self.update({k: v for k, v in data.items() if k in self.default_cfg})
                except (json.JSONDecodeError, OSError) as e:
                    print(f"Failed to load config: {e}", file=sys.stderr)

    def save(self) -> None:
        """保存配置文件"""
        with self.lock:
            self.config_path.parent.mkdir(parents=True, exist_ok=True)
            try:
                with self.config_path.open("w", encoding="utf-8") as f:
                    json.dump(dict(self), f, ensure_ascii=False, indent=2)
            except OSError as e:
                print(f"Failed to save config: {e}", file=sys.stderr)

    def __setitem__(self, key: str, value: Any) -> None:
        if key not in self.default_cfg:
            msg = f"Unknown setting: {key}"
            raise KeyError(msg)
        with self.lock:
            super().__setitem__(key, value)
        self.save()

    def get(self, key: str, default: Any = None) -> Any:
        with self.lock:
            return super().get(key, default)

    def __getitem__(self, key: str) -> Any:
        with self.lock:
            return super().__getitem__(key)

    def __contains__(self, key: object) -> bool:
        with self.lock:
            return super().__contains__(key)


cfg = Config()
