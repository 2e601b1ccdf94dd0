# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""日志记录器: 按日期写入日志目录,同时输出到stderr(stdout留给命令输出)"""

import logging
import sys
import time
from logging import DEBUG, INFO

from .config import cfg
from .paths import log_dir

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

log_file = log_dir / f"{time.strftime('%Y.%m.%d', time.localtime())}.log"
log_file.parent.mkdir(parents=True, exist_ok=True)


def str2log_level(level: str) -> int:
    if level.upper() not in LOG_LEVELS:
        msg = f"无效的日志级别: {level} (可选 {', '.join(LOG_LEVELS)})"
        raise ValueError(msg)
    return logging.getLevelName(level.upper())


class Logger:
    def __init__(self) -> None:
        self.logger = logging.getLogger("GridRestore")
        self.logger.propagate = False

        formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(threadName)s - %(message)s")
        self.file_handler = logging.FileHandler(log_file, encoding="utf-8")
        self.console_handler = logging.StreamHandler(sys.stderr)
        for handler in (self.file_handler, self.console_handler):
            handler.setFormatter(formatter)
            self.logger.addHandler(handler)

        self.set_level(cfg.get("log_level", "INFO"))

    def set_level(self, level: str) -> None:
        value = str2log_level(level)
        self.logger.setLevel(value)
        self.file_handler.setLevel(value)
        self.console_handler.setLevel(max(value, INFO))  # 调试信息只写入文件

    def is_debug(self) -> bool:
        return self.logger.isEnabledFor(DEBUG)

    def debug(self, msg: str) -> None:
        self.logger.debug(msg)

    def info(self, msg: str) -> None:
        self.logger.info(msg)

    def warning(self, msg: str) -> None:
        self.logger.warning(msg)

    def error(self, msg: str) -> None:
        self.logger.error(msg)

    def exception(self, msg: str) -> None:
        self.logger.exception(msg)


logger = Logger()
