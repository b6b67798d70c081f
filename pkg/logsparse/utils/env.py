import os
import json
from pathlib import Path
from typing import Any

from psutil import Process, cpu_count

from ..main import Setup

__all__ = [
    "save_setup",
    "get_setup_attr",
    "get_out_dir",
    "is_debug",
    "get_threads",
    "available_threads",
]

SETUP_ENV = "logsparse_setup"


def save_setup(setup: Setup):
    os.environ[SETUP_ENV] = setup._toJson()


def get_setup_attr(attr: str, default: Any = None) -> Any:
    envi = os.environ.get(SETUP_ENV)
    if not envi:
        return default
    loaded = json.loads(envi)
    if loaded and isinstance(loaded, dict):
        return loaded.get(attr, default)
    return default


def get_out_dir() -> Path:
    out = Path(get_setup_attr("out_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out.resolve()


def is_debug() -> bool:
    return get_setup_attr("debug", False)


def available_threads() -> int:
    """CPUs this process may run on. Falls back to the logical cpu count where affinity is unsupported."""
    try:
        return max(1, len(Process().cpu_affinity()))
    except (AttributeError, NotImplementedError):
        return max(1, cpu_count() or 1)


def get_threads(requested: int | None = None) -> int:
    threads = requested if requested is not None else get_setup_attr("threads", 1)
    if not threads or threads < 1:
        return available_threads()
    return min(int(threads), available_threads())
