# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
"""Tests for GridRestore.core.checkpoint."""

import json
from pathlib import Path

import numpy as np
import pytest

from GridRestore.common.exceptions import CheckpointError, CheckpointMismatchError
from GridRestore.common.models import FeederGraph, RunConfig, TrainConfig
from GridRestore.core.checkpoint import build_actors, check_compatible, load_checkpoint, restore_trainer, save_checkpoint
from GridRestore.core.env import RestorationEnv
from GridRestore.core.happo import Trainer

CONFIG = TrainConfig(hidden_dims=(8,), rollout_length=8, minibatch_size=4, ppo_epochs=1, critic_epochs=1)


@pytest.fixture
def trained(toy4: FeederGraph) -> Trainer:
    trainer = Trainer(RestorationEnv(toy4, seed=3), CONFIG, seed=3)
    trainer.iterate()
    return trainer


class TestCheckpoint:
    def test_round_trip(self, trained: Trainer, toy4: FeederGraph, tmp_path: Path) -> None:
        run_config = RunConfig(feeder="toy4", train=CONFIG)
        path = save_checkpoint(tmp_path / "ckpt.npz", trained, toy4.fingerprint(), run_config)
        checkpoint = load_checkpoint(path)
        assert checkpoint.meta["iteration"] == 1
        assert checkpoint.obs_dims == (10, 9)
        assert checkpoint.run_config == run_config
        for actor, state in zip(trained.actors, checkpoint.actors, strict=True):
            np.testing.assert_array_equal(actor.params, state.params)
            np.testing.assert_array_equal(actor.adam.v, state.adam.v)
            assert actor.adam.step == state.adam.step
        actors = build_actors(checkpoint)
        assert [actor.digest() for actor in actors] == [actor.digest() for actor in trained.actors]

    def test_resume_continues_identically(self, trained: Trainer, toy4: FeederGraph, tmp_path: Path) -> None:
        path = save_checkpoint(tmp_path / "ckpt.npz", trained, toy4.fingerprint())
        resumed = Trainer(RestorationEnv(toy4, seed=99), CONFIG, seed=99)
        restore_trainer(resumed, load_checkpoint(path))
        assert resumed.iterate() == trained.iterate()

    def test_dimension_mismatch(self, trained: Trainer, toy13: FeederGraph, tmp_path: Path) -> None:
        path = save_checkpoint(tmp_path / "ckpt.npz", trained, "toy4")
        with pytest.raises(CheckpointMismatchError, match="obs_dims"):
            check_compatible(load_checkpoint(path), RestorationEnv(toy13))

    def test_incompatible_format(self, trained: Trainer, tmp_path: Path) -> None:
        path = save_checkpoint(tmp_path / "ckpt.npz", trained, "toy4")
        with np.load(path) as data:
            arrays = {key: data[key] for key in data.files}
        meta = json.loads(str(arrays["meta"]))
        meta["format_version"] = "v2.0.0"
        arrays["meta"] = np.array(json.dumps(meta))
        np.savez(path, **arrays)
        with pytest.raises(CheckpointError, match="v2.0.0"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "missing.npz")
