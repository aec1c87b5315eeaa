"""Single global event queue.

Events carry (time, sequence) keys: simultaneous events run in insertion
order, so a run is a pure function of its inputs. The loop is strictly
single-threaded; determinism outranks speed.
"""

from __future__ import annotations

import heapq
from typing import Callable, List, Optional, Tuple


class Simulator:
    def __init__(self) -> None:
        self.now: int = 0
        self._heap: List[Tuple[int, int, Callable[[], None]]] = []
        self._seq = 0

    def schedule_at(self, when: int, fn: Callable[[], None]) -> None:
        if when < self.now:
            raise ValueError(f"cannot schedule into the past: {when} < {self.now}")
        heapq.heappush(self._heap, (when, self._seq, fn))
        self._seq += 1

    def schedule(self, delay: int, fn: Callable[[], None]) -> None:
        self.schedule_at(self.now + delay, fn)

    def pending(self) -> int:
        return len(self._heap)

    def run(self, until: Optional[int] = None) -> None:
        """Process events until the queue drains (or past ``until``)."""
        while self._heap:
            when, _, fn = self._heap[0]
            if until is not None and when > until:
                break
            heapq.heappop(self._heap)
            self.now = when
            fn()
