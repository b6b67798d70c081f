import logging
from rich.logging import RichHandler
from rich.console import Console
from rich.theme import Theme
from typing import Any

from .errors import LoggingException

__all__ = ["crit", "debug", "error", "quiet", "info", "warn", "logger", "danger", "LoggingException"]


FORMAT = "%(name)s | %(message)s"
console = Console(theme=Theme({"logging.level.warn": "gold3", "logging.level.danger": "red"}), stderr=True)
logging.basicConfig(format=FORMAT, datefmt="[%X]", handlers=[RichHandler(markup=True, omit_repeated_times=False, show_path=False, console=console)])

logging.addLevelName(logging.WARNING, "WARN")
logging.addLevelName(35, "DANGER")
logger = logging.getLogger("logsparse")
logger.setLevel(logging.DEBUG)


def _format_msg(msg: str, caller: Any) -> str:
    if caller and not isinstance(caller, str):
        caller = caller.__class__.__qualname__ if hasattr(caller, "__class__") and caller.__class__.__name__ not in ["function", "method"] else caller
        caller = caller.__name__ if not isinstance(caller, str) else caller
    return msg if caller is None else f"[bold]{caller}:[/] {msg}"


def crit(msg: str, caller: Any = None, exc: type[LoggingException] = LoggingException) -> LoggingException:
    message = _format_msg(msg, caller)
    logger.critical(message)
    return exc(message)


def debug(msg: str, caller: Any = None):
    from .env import is_debug

    if not is_debug():
        return
    message = _format_msg(msg, caller)
    logger.debug(message)


def info(msg: str, caller: Any = None):
    message = _format_msg(msg, caller)
    logger.info(message)


def warn(msg: str, caller: Any = None):
    message = _format_msg(msg, caller)
    logger.warning(message)


def danger(msg: str, caller: Any = None):
    message = _format_msg(msg, caller)
    logger.log(35, message)


def quiet(msg: str, caller: Any = None, exc: type[LoggingException] = LoggingException) -> LoggingException:
    """Like `error` but only logs in debug mode. For failures the caller is expected to handle."""
    message = _format_msg(msg, caller)
    debug(msg, caller)
    return exc(message)


def error(msg: str, caller: Any = None, exc: type[LoggingException] = LoggingException) -> LoggingException:
    """
    Logs the message and returns an exception of the requested type for the caller to raise.

    :param msg:         The message. Rich markup is allowed.
    :param caller:      Function, object or plain string used as the message prefix.
    :param exc:         Exception class to instantiate. Must derive from LoggingException.
    """
    message = _format_msg(msg, caller)
    logger.error(message)
    return exc(message)
