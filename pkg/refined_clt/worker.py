"""Replicate worker pool.

Replicates are generated in fixed-size blocks, each from its own keyed substream
(see ``refined_clt.rng``). The pool maps a block function over block indices,
either in worker processes or serially, and reassembles the results in block
order, so an ensemble does not depend on how many workers produced it.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable
from concurrent.futures import Executor, ProcessPoolExecutor
from types import TracebackType
from typing import Any

import numpy as np

from refined_clt import rng
from refined_clt.config import settings
from refined_clt.errors import ConfigurationError

logger = logging.getLogger(__name__)

# fn(seed, task, block, count, *args) -> 1-D array of ``count`` values
BlockFn = Callable[..., np.ndarray]


class ReplicatePool:
    """
    Runs replicate blocks serially (workers=1) or on a process pool (workers>1).

    Block functions and their arguments must be picklable when workers > 1:
    module-level functions, dataclasses and accessor classes, no closures.
    """

    def __init__(self, workers: int | None = None, block_size: int | None = None) -> None:
        self.workers = workers or settings.workers
        self.block_size = block_size or settings.block_size
        if self.workers < 1 or self.block_size < 1:
            raise ConfigurationError("workers and block_size must be positive")
        self.executor: Executor | None = None

    def __enter__(self) -> ReplicatePool:
        self.start()
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self.shutdown()

    def start(self) -> None:
        concurrency = self._get_concurrency_settings()
        if self.workers > 1 and self.executor is None:
            self.executor = ProcessPoolExecutor(max_workers=self.workers)
        logger.info(
            f"🚀 Replicate pool started ({concurrency['mode']}): "
            f"{concurrency['workers']} workers, {concurrency['block_size']} replicates per block"
        )

    def shutdown(self) -> None:
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None
            logger.info("🛑 Replicate pool stopped")

    def _get_concurrency_settings(self) -> dict[str, Any]:
        """Serial mode keeps everything in-process; process mode fans blocks out."""
        return {
            "mode": "process" if self.workers > 1 else "serial",
            "workers": self.workers,
            "block_size": self.block_size,
        }

    def run(self, fn: BlockFn, seed: int, task: int, reps: int, *args: Any) -> np.ndarray:
        """Concatenate ``fn`` over the blocks covering ``reps`` replicates.

        Args:
            fn: Block function called as fn(seed, task, block, count, *args).
            seed: Master seed.
            task: Task key (see ``rng.task_key``).
            reps: Total replicate count.
            *args: Extra arguments forwarded to every block.

        Returns:
            Array of ``reps`` values in replicate order.
        """
        return np.concatenate(self.map_blocks(fn, seed, task, reps, *args))

    def map_blocks(
        self, fn: Callable[..., Any], seed: int, task: int, reps: int, *args: Any
    ) -> list[Any]:
        """Per-block results of ``fn`` in block order."""
        layout = rng.block_layout(reps, self.block_size)
        started = time.perf_counter()
        if self.workers > 1 and len(layout) > 1:
            if self.executor is None:
                self.start()
            assert self.executor is not None
            futures = [
                self.executor.submit(fn, seed, task, block, count, *args) for block, count in layout
            ]
            parts = [future.result() for future in futures]
        else:
            parts = [fn(seed, task, block, count, *args) for block, count in layout]
        logger.debug(
            f"{len(layout)} blocks ({reps} replicates) in {time.perf_counter() - started:.2f}s"
        )
        return parts
