"""
Per-item worker pool shared by simulation, training and evaluation
"""
import os
from multiprocessing import Pool
from typing import Callable, Iterable, List, Optional, TypeVar

from tqdm import tqdm

from src.graph.precision import get_precision, set_precision

T = TypeVar('T')
R = TypeVar('R')


def default_jobs() -> int:
    """Logical core count, at least 1"""
    return os.cpu_count() or 1


def _init_worker(mode: str) -> None:
    set_precision(mode)


def parallel_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    jobs: Optional[int] = 1,
    progress: Optional[str] = None,
) -> List[R]:
    """
    Map fn over items, preserving order

    Args:
        fn: Picklable function applied to each item
        items: Items to process
        jobs: Worker count (1 runs inline, None uses all cores)
        progress: Progress-bar label, or None for no bar

    Returns:
        Results in input order
    """
    items = list(items)
    jobs = default_jobs() if jobs is None else max(1, jobs)
    jobs = min(jobs, max(1, len(items)))

    if jobs == 1:
        iterator = map(fn, items)
        if progress:
            iterator = tqdm(iterator, total=len(items), desc=progress)
        return list(iterator)

    with Pool(jobs, initializer=_init_worker, initargs=(get_precision(),)) as pool:
        iterator = pool.imap(fn, items)
        if progress:
            iterator = tqdm(iterator, total=len(items), desc=progress)
        return list(iterator)
