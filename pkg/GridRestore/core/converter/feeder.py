# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
import json
from pathlib import Path

from GridRestore.common.models import FeederGraph


def feeder2json(graph: FeederGraph) -> str:
    return json.dumps(graph.to_dict(), ensure_ascii=False, indent=2) + "\n"


def dump_feeder(graph: FeederGraph, path: str | Path) -> Path:
    """将FeederGraph写为馈线文件,load_feeder的逆操作"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(feeder2json(graph), encoding="utf-8")
    return path
