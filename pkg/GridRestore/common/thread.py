# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
import concurrent.futures
from collections.abc import Callable, Sequence
from threading import Event

import psutil

from .config import cfg
from .logger import logger
from .models import T

exit_event = Event()


def is_exited() -> bool:
    return exit_event.is_set()


def set_exited() -> None:
    exit_event.set()


def clear_exited() -> None:
    exit_event.clear()


def default_workers() -> int:
    """默认并行任务数: 用户设置优先,否则为物理核心数"""
    if (workers := cfg.get("max_workers")) is not None:
        return max(1, int(workers))
    return max(1, psutil.cpu_count(logical=False) or 1)


def run_jobs(jobs: Sequence[Callable[[], T]], workers: int | None = None) -> list[T]:
    """并行执行相互独立的任务,按提交顺序返回结果

    开始时清除退出事件;任一任务失败时设置退出事件(其余任务在下一次检查时停止并落盘),然后重新抛出第一个异常
    """
    clear_exited()
    workers = min(len(jobs), workers or default_workers()) or 1
    if workers == 1:
        return [job() for job in jobs]

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers, thread_name_prefix="job") as threadpool:
        futures = [threadpool.submit(job) for job in jobs]
        results: list[T] = []
        first_error: BaseException | None = None
        for future in futures:
            try:
                results.append(future.result())
            except BaseException as e:
                if first_error is None:
                    logger.error(f"任务失败: {e!r}")
                    set_exited()
                    first_error = e
        if first_error is not None:
            raise first_error
        return results
