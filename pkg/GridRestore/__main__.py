# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
import sys
from importlib.util import find_spec
from pathlib import Path

if find_spec("GridRestore") is None:
    sys.path.append(str(Path(__file__).resolve().parent.parent))

# ruff: noqa: E402
from GridRestore.cli.main import run

if __name__ == "__main__":
    run()
