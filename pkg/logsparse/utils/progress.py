from typing import Any, TypeVar
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass

from rich.progress import Progress, TextColumn, BarColumn, TaskProgressColumn, TimeRemainingColumn, TimeElapsedColumn

from .log import console

__all__ = ["ProgressBarConfig", "make_progress", "map_with_progress"]

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class ProgressBarConfig:
    description: str = ""
    transient: bool = False
    disable: bool = False


def make_progress(pbc: ProgressBarConfig = ProgressBarConfig()) -> Progress:
    return Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        TimeRemainingColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=pbc.transient,
        disable=pbc.disable,
    )


def map_with_progress(fn: Callable[[T], R], items: Sequence[T], threads: int = 1, pbc: ProgressBarConfig = ProgressBarConfig(), **kwargs: Any) -> list[R]:
    """
    Applies `fn` to every item and returns the results in input order, advancing a progress bar as items finish.

    :param fn:          Function applied to each item
    :param items:       Work items
    :param threads:     Worker threads. 1 runs in the calling thread.
    :param pbc:         Progress bar settings
    :param kwargs:      Passed to every call of `fn`
    """
    results: list[Any] = [None] * len(items)
    with make_progress(pbc) as pro:
        task = pro.add_task(pbc.description, total=len(items))
        if threads <= 1:
            for i, item in enumerate(items):
                results[i] = fn(item, **kwargs)
                pro.advance(task)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = {pool.submit(fn, item, **kwargs): i for i, item in enumerate(items)}
                for future in as_completed(futures):
                    results[futures[future]] = future.result()
                    pro.advance(task)
    return results
