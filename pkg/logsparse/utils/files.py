import binascii
from typing import Any
from pathlib import Path

from .log import crit
from .errors import LoggingException
from .types import PathLike
from .env import get_out_dir

__all__ = ["ensure_path", "ensure_path_exists", "get_crc32", "digest_files", "make_output"]


def ensure_path(pathIn: PathLike, caller: Any) -> Path:
    """
    Utility function for other functions to make sure a path was passed to them.

    :param pathIn:      Supposed passed Path
    :param caller:      Caller name used for the exception and error message
    """
    if pathIn is None:
        raise crit("Path cannot be None.", caller)
    else:
        return Path(pathIn).resolve()


def ensure_path_exists(pathIn: PathLike, caller: Any, allow_dir: bool = False, exc: type[LoggingException] = LoggingException) -> Path:
    """
    Utility function for other functions to make sure a path was passed to them and that it exists.

    :param pathIn:      Supposed passed Path
    :param caller:      Caller name used for the exception and error message
    :param exc:         Exception raised for a missing target
    """
    path = ensure_path(pathIn, caller)
    if not path.exists():
        raise crit(f"Path target '{path}' does not exist.", caller, exc)
    if not allow_dir and path.is_dir():
        raise crit("Path cannot be a directory.", caller, exc)
    return path


def get_crc32(file: PathLike) -> str:
    """
    Generates crc32 checksum for file

    :param file:        Input file

    :return:            Checksum for file
    """
    with open(file, "rb") as f:
        buf = binascii.crc32(f.read()) & 0xFFFFFFFF
    return "%08X" % buf


def digest_files(files: list[PathLike]) -> str:
    """
    Combined checksum of several input files. The order of the files matters.

    :return:            One crc32 per file joined with '-' or an empty string for no files.
    """
    return "-".join(get_crc32(f) for f in files if f is not None)


def make_output(name: str, ext: str, suffix: str = "", user_passed: PathLike | None = None) -> Path:
    """
    Creates a path in the output directory of the current setup.

    :param name:            Base name of the output
    :param ext:             Extension without leading dot
    :param suffix:          Appended to the base name
    :param user_passed:     Path the user passed. Used as-is when given.
    """
    if user_passed:
        return Path(user_passed).resolve()
    return get_out_dir() / f"{name}{suffix}.{ext.lstrip('.')}"
