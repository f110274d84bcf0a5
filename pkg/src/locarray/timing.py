from __future__ import annotations

import time


class BudgetExceeded(RuntimeError):
    """A wall-clock or work budget ran out.  ``partial`` holds whatever was finished."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class Deadline:
    """Wall-clock limit polled at safe checkpoints."""

    def __init__(self, seconds: float | None):
        self.seconds = seconds
        self.start = time.monotonic()

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.start

    def expired(self) -> bool:
        return self.seconds is not None and self.elapsed >= self.seconds

    def check(self, where: str = "") -> None:
        if self.expired():
            suffix = f" during {where}" if where else ""
            raise BudgetExceeded(f"timeout of {self.seconds:g}s exceeded{suffix}")


def check(deadline: Deadline | None, where: str = "") -> None:
    if deadline is not None:
        deadline.check(where)
