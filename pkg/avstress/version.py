"""Package version, and the runtime snapshot written to ``run.json``."""
from __future__ import annotations

import platform
import sys
from importlib.metadata import PackageNotFoundError, version as _dist_version
from typing import Dict

import matplotlib
import numpy as np

# used when the distribution is not installed (source checkout)
__version__ = "0.2.0"

DIST_NAME = "crosswalk-ast"


def installed_version() -> str:
    try:
        return _dist_version(DIST_NAME)
    except PackageNotFoundError:
        return __version__


def environment() -> Dict[str, str]:
    # numerics depend on these; recorded so a replay mismatch can be traced
    return {
        "python_version": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy_version": np.__version__,
        "matplotlib_version": matplotlib.__version__,
    }


def get_version(verbose: bool = False) -> str:
    v = installed_version()
    if not verbose:
        return v
    env = environment()
    line = f"{v} (python {env['python_version']}, numpy {env['numpy_version']}, matplotlib {env['matplotlib_version']})"
    if v != __version__:
        line += f", source {__version__}"
    return line
