# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""版本信息与处理模块"""

__version__ = "v0.3.0"
CHECKPOINT_FORMAT_VERSION = "v1.1.0"  # 检查点文件格式版本,主版本号不同即不兼容

import re
from typing import Literal

_VERSION_PATTERN = re.compile(
    r"^v?(?P<major>\d+)\.(?P<minor>\d+)\.(?P<patch>\d+)(?:-(?P<prerelease>[0-9A-Za-z\-.]+))?(?:\+(?P<build>[0-9A-Za-z\-.]+))?$",
)


def code_version() -> str:
    """写入resolved-config与检查点的代码版本字符串"""
    return f"GridRestore {__version__}"


def parse_version(version: str) -> tuple[int, int, int, str | None, str | None]:
    """将语义化版本字符串解析为主版本号、次版本号、修订号、先行版本号和版本编译信息。"""
    match = _VERSION_PATTERN.match(version)
    if not match:
        msg = f"Invalid version format: {version}"
        raise ValueError(msg)

    major, minor, patch = int(match.group("major")), int(match.group("minor")), int(match.group("patch"))
    return major, minor, patch, match.group("prerelease"), match.group("build")


def compare_versions(version1: str, version2: str) -> Literal[-1, 0, 1]:
    """比较两个语义化版本号的主版本号、次版本号与修订号

    返回值:
    - 1: 如果 version1 > version2
    - -1: 如果 version1 < version2
    - 0: 如果 version1 == version2
    """
    v1 = parse_version(version1)[:3]
    v2 = parse_version(version2)[:3]
    if v1 > v2:
        return 1
    if v1 < v2:
        return -1
    return 0


def is_compatible_format(version: str) -> bool:
    """检查点格式是否可被当前代码读取(主版本号相同且不高于当前版本)"""
    return parse_version(version)[0] == parse_version(CHECKPOINT_FORMAT_VERSION)[0] and compare_versions(version, CHECKPOINT_FORMAT_VERSION) <= 0
