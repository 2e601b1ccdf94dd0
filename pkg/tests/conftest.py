# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
import os
import sys
import tempfile
from pathlib import Path

import pytest

# 在导入GridRestore之前把配置/缓存/日志目录指向临时目录
_temp_dir = tempfile.TemporaryDirectory(prefix="gridrestore-test-")
_temp_path = Path(_temp_dir.name)
for _name in ("config", "cache", "logs"):
    (_temp_path / _name).mkdir(exist_ok=True)
os.environ["GRIDRESTORE_CONFIG_DIR"] = str(_temp_path / "config")
os.environ["GRIDRESTORE_CACHE_DIR"] = str(_temp_path / "cache")
os.environ["GRIDRESTORE_LOG_DIR"] = str(_temp_path / "logs")
os.environ.pop("GRIDRESTORE_SEED", None)

# 添加项目根目录到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from GridRestore.common.models import FeederGraph, ScenarioConfig  # noqa: E402
from GridRestore.common.paths import bundled_feeders_dir  # noqa: E402
from GridRestore.core.env import RestorationEnv  # noqa: E402
from GridRestore.core.parser.feeder import load_feeder  # noqa: E402


@pytest.fixture(scope="session")
def toy4() -> FeederGraph:
    return load_feeder(bundled_feeders_dir / "toy4.json")


@pytest.fixture(scope="session")
def toy13() -> FeederGraph:
    return load_feeder(bundled_feeders_dir / "toy13.json")


@pytest.fixture(scope="session")
def toy34() -> FeederGraph:
    return load_feeder(bundled_feeders_dir / "toy34.json")


@pytest.fixture(scope="session")
def toy13_capped() -> FeederGraph:
    """toy13 的全网DER出力上限降为 600 kW"""
    return load_feeder(bundled_feeders_dir / "toy13_capped.json")


@pytest.fixture
def toy13_env(toy13: FeederGraph) -> RestorationEnv:
    return RestorationEnv(toy13, ScenarioConfig(), seed=7)


@pytest.fixture
def toy4_env(toy4: FeederGraph) -> RestorationEnv:
    return RestorationEnv(toy4, ScenarioConfig(), seed=7)


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: marks tests as slow (deselect with '-m \"not slow\"')")
    config.addinivalue_line("markers", "integration: marks tests as integration tests")
    config.addinivalue_line("markers", "unit: marks tests as unit tests")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:  # noqa: ARG001
    # 为没有标记的测试添加unit标记
    for item in items:
        if not any(mark.name in ["slow", "integration", "unit"] for mark in item.iter_markers()):
            item.add_marker(pytest.mark.unit)


def pytest_unconfigure(config: pytest.Config) -> None:  # noqa: ARG001
    _temp_dir.cleanup()
