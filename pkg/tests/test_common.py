# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
import json
import logging
import threading
from pathlib import Path

import pytest

from GridRestore.common import thread
from GridRestore.common.config import cfg
from GridRestore.common.logger import LOG_LEVELS, logger, str2log_level
from GridRestore.common.paths import bundled_feeders_dir, resolve_feeder_path
from GridRestore.common.version import code_version, compare_versions, is_compatible_format, parse_version


class TestConfig:
    def test_defaults(self) -> None:
        assert cfg["log_level"] in LOG_LEVELS
        assert "oracle_cache" in cfg
        assert cfg.get("missing", 3) == 3

    def test_unknown_key(self) -> None:
        with pytest.raises(KeyError):
            cfg["colour"] = "red"

    def test_set_persists(self) -> None:
        old = cfg["max_workers"]
        try:
            cfg["max_workers"] = 3
            data = json.loads(cfg.config_path.read_text(encoding="utf-8"))
            assert data["max_workers"] == 3
            assert thread.default_workers() == 3
        finally:
            cfg["max_workers"] = old


class TestVersion:
    def test_parse(self) -> None:
        assert parse_version("v1.2.3-rc.1+abc") == (1, 2, 3, "rc.1", "abc")
        with pytest.raises(ValueError, match="Invalid version"):
            parse_version("1.2")

    def test_compare(self) -> None:
        assert compare_versions("v1.2.3", "1.2.3") == 0
        assert compare_versions("v1.10.0", "v1.9.9") == 1
        assert compare_versions("v0.9.0", "v1.0.0") == -1

    def test_checkpoint_format(self) -> None:
        assert is_compatible_format("v1.0.0")
        assert not is_compatible_format("v2.0.0")
        assert not is_compatible_format("v0.9.0")
        assert code_version().startswith("GridRestore ")


class TestRunJobs:
    def test_keeps_order(self) -> None:
        jobs = [lambda i=i: i * i for i in range(6)]
        assert thread.run_jobs(jobs, workers=3) == [0, 1, 4, 9, 16, 25]
        assert thread.run_jobs(jobs, workers=1) == [0, 1, 4, 9, 16, 25]

    def test_inline_when_single_worker(self) -> None:
        names: list[str] = []
        thread.run_jobs([lambda: names.append(threading.current_thread().name)], workers=1)
        assert names == [threading.current_thread().name]

    def test_error_sets_exit_event(self) -> None:
        def fail() -> int:
            msg = "boom"
            raise RuntimeError(msg)

        try:
            with pytest.raises(RuntimeError, match="boom"):
                thread.run_jobs([lambda: 1, fail], workers=2)
            assert thread.is_exited()
        finally:
            thread.clear_exited()

    def test_next_call_starts_clean(self) -> None:
        thread.set_exited()
        try:
            assert thread.run_jobs([thread.is_exited, thread.is_exited], workers=2) == [False, False]
            assert thread.run_jobs([thread.is_exited], workers=1) == [False]
        finally:
            thread.clear_exited()


class TestLogger:
    @pytest.mark.parametrize(("name", "level"), [("debug", logging.DEBUG), ("INFO", logging.INFO), ("Warning", logging.WARNING)])
    def test_level_names(self, name: str, level: int) -> None:
        assert str2log_level(name) == level

    def test_invalid_level(self) -> None:
        with pytest.raises(ValueError, match="LOUD"):
            str2log_level("LOUD")

    def test_console_stays_at_info(self) -> None:
        try:
            logger.set_level("DEBUG")
            assert logger.is_debug()
            assert logger.file_handler.level == logging.DEBUG
            assert logger.console_handler.level == logging.INFO
        finally:
            logger.set_level("INFO")
        assert not logger.is_debug()


class TestPaths:
    def test_bundled_name(self) -> None:
        assert resolve_feeder_path("toy13") == bundled_feeders_dir / "toy13.json"

    def test_relative_to_base(self, tmp_path: Path) -> None:
        (tmp_path / "mine.json").write_text("{}", encoding="utf-8")
        assert resolve_feeder_path("mine.json", tmp_path) == tmp_path / "mine.json"

    def test_missing_returns_input(self) -> None:
        assert resolve_feeder_path("no/such/feeder.json") == Path("no/such/feeder.json")
