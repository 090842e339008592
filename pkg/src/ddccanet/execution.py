"""Execution settings and the worker pool used by the batched stages.

Sequential mode (threads = 1) runs everything inline and is the semantic
reference; parallel runs only reorder work, never change per-item inputs.
"""

from __future__ import annotations

from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class ExecSettings:
    threads: int = 1
    deterministic: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.threads < 1:
            raise ConfigError(f"thread count {self.threads} must be >= 1")


class Executor:
    """Thin wrapper around a thread pool with ordered and completion-order maps."""

    def __init__(self, settings: ExecSettings):
        self.settings = settings
        self._pool = ThreadPoolExecutor(max_workers=settings.threads) if settings.threads > 1 else None

    @property
    def threads(self) -> int:
        return self.settings.threads

    @property
    def deterministic(self) -> bool:
        return self.settings.deterministic

    def map_ordered(self, fn, items) -> list:
        """Apply fn to every item; results in item order."""
        if self._pool is None:
            return [fn(item) for item in items]
        return list(self._pool.map(fn, items))

    def map_completion_order(self, fn, items):
        """Yield results as they finish; ordering is nondeterministic."""
        if self._pool is None:
            for item in items:
                yield fn(item)
            return
        pending = {self._pool.submit(fn, item) for item in items}
        while pending:
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for fut in done:
                yield fut.result()

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
