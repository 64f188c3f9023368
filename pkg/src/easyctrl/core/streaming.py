"""
Ordered, prefetching batch streams for the training loop and the dataset writers
"""
import logging
import os
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from typing import Callable, Deque, Generic, Iterable, Iterator, Optional, TypeVar

from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

THREADS_ENV = "EASYCTRL_THREADS"


def thread_count() -> int:
    """
    Worker thread cap: EASYCTRL_THREADS when set to a positive integer, else the machine's cores.
    """
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            count = int(value)
            if count > 0:
                return count
        except ValueError:
            pass
        logger.warning(f"Ignoring invalid {THREADS_ENV}={value!r}")
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None,
                lookahead: Optional[int] = None) -> Iterator[R]:
    """
    Apply `fn` to `items` on a thread pool, yielding results in input order.

    At most `lookahead` calls are in flight at once.

    Args:
        fn: Function to apply
        items: Inputs
        workers: Thread count (defaults to thread_count())
        lookahead: Maximum number of pending results (defaults to 2 x workers)

    Yields:
        R: fn(item) for each item, in order
    """
    workers = workers or thread_count()
    if workers == 1:
        for item in items:
            yield fn(item)
        return
    lookahead = lookahead or 2 * workers
    pending: Deque[Future] = deque()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for item in items:
            pending.append(pool.submit(fn, item))
            if len(pending) >= lookahead:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


class BatchStream(Generic[T]):
    """
    BatchStream builds the batch for every step ahead of the consumer, in step order
    """

    def __init__(self,
                 make_batch: Callable[[int], T],
                 steps: int,
                 start: int = 0,
                 prefetch: int = 2,
                 workers: Optional[int] = None,
                 progress_bar: bool = True,
                 desc: Optional[str] = None):
        """
        Initialize a BatchStream.

        Args:
            make_batch: Function from a step index to that step's batch
            steps: Number of steps to stream
            start: First step index
            prefetch: Number of batches prepared ahead of the consumer
            workers: Thread count for batch assembly
            progress_bar: Whether to show a progress bar
            desc: Progress bar label
        """
        self.make_batch = make_batch
        self.steps = steps
        self.start = start
        self.prefetch = max(prefetch, 1)
        self.workers = workers or min(thread_count(), self.prefetch)
        self.progress_bar = progress_bar
        self.desc = desc

    def __len__(self) -> int:
        return self.steps

    def __iter__(self) -> Iterator[T]:
        batches = ordered_map(self.make_batch, range(self.start, self.start + self.steps),
                              workers=self.workers, lookahead=self.prefetch)
        if self.progress_bar:
            yield from tqdm(batches, total=self.steps, desc=self.desc)
        else:
            yield from batches

    def __repr__(self) -> str:
        return f"BatchStream(steps={self.steps}, start={self.start}, prefetch={self.prefetch})"
