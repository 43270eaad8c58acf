"""Single-flight inference execution with a bounded queue.

Forward passes are the unit of work: one worker per compute device drains a
bounded queue, so concurrent requests are serialized (keeping latency
predictable and outputs deterministic) and overload surfaces as a fast,
retryable rejection instead of unbounded queueing.
"""

from __future__ import annotations

import queue
import threading
from concurrent.futures import Future
from typing import Callable


class QueueFullError(RuntimeError):
    pass


class InferenceWorker:
    def __init__(self, capacity: int = 8):
        self._queue: queue.Queue = queue.Queue(maxsize=capacity)
        self._thread = threading.Thread(target=self._run, name="inference-worker", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                return
            fn, future = item
            if not future.set_running_or_notify_cancel():
                continue
            try:
                future.set_result(fn())
            except BaseException as exc:  # propagate to the caller
                future.set_exception(exc)

    def submit(self, fn: Callable):
        future: Future = Future()
        try:
            self._queue.put_nowait((fn, future))
        except queue.Full:
            raise QueueFullError("inference queue full, retry later") from None
        return future

    def shutdown(self) -> None:
        self._queue.put(None)
        self._thread.join(timeout=5)
