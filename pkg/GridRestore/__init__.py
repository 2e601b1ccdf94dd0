# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

from .common.version import __version__

__author__ = "GridRestore developers"
__license__ = "GPL-3.0-only"
__copyright__ = "Copyright (C) 2025 GridRestore developers"

__all__ = ["__author__", "__copyright__", "__license__", "__version__"]
