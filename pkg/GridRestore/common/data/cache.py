# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
import atexit
from collections.abc import Callable, Hashable
from threading import Lock
from typing import Any

from diskcache import Cache

from GridRestore.common.config import cfg
from GridRestore.common.logger import logger
from GridRestore.common.models import T
from GridRestore.common.paths import cache_dir

cache_version = 2
_cache: Cache | None = None
_cache_lock = Lock()


def get_cache() -> Cache:
    """获取(首次调用时打开)磁盘缓存,缓存版本不一致时清空"""
    global _cache  # noqa: PLW0603
    with _cache_lock:
        if _cache is None:
            _cache = Cache(cache_dir, sqlitecache_size=512)
            if _cache.get("version") != cache_version:
                _cache.clear()
            _cache["version"] = cache_version
        return _cache


def cached_call(func: Callable[..., T], key: tuple[Hashable, ...], *args: Any, expire: int | None = None, **kwargs: Any) -> tuple[T, bool]:
    """带缓存地调用函数

    Args:
        func (Callable): 要缓存的函数
        key (tuple): 调用方构造的缓存键(不含函数标识)
        *args: 位置参数
        expire (int | None): 缓存过期时间,单位为秒
        **kwargs: 关键字参数

    Returns:
        tuple[T, bool]: 函数返回值, 是否命中缓存

    """
    if not cfg.get("oracle_cache", True):
        return func(*args, **kwargs), False

    full_key = (f"{func.__module__}.{func.__qualname__}", *key)
    cache = get_cache()
    if (cached := cache.get(full_key)) is not None:
        logger.debug(f"缓存命中: {full_key[0]}")
        return cached, True

    result = func(*args, **kwargs)
    cache.set(full_key, result, expire=expire)
    return result, False


def _atexit() -> None:
    if _cache is not None:
        _cache.expire()
        _cache.close()


atexit.register(_atexit)
