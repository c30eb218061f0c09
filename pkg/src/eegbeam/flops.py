"""Deterministic multiply-add accounting.

Kernels report the multiply-adds they perform with :func:`add`. Counts are
collected only inside a :func:`counting` block, so the numerical code pays
nothing when nobody is measuring.

>>> with counting() as tally:
...     add("reconstruction", 32)
>>> tally.total
32
"""
from __future__ import annotations

import contextlib
import contextvars
import threading
from collections import Counter
from typing import Iterator


class Tally(Counter):
    """Multiply-add counts keyed by stage name."""

    @property
    def total(self) -> int:
        return int(sum(self.values()))


_merge_lock = threading.Lock()
_active: contextvars.ContextVar[Tally | None] = contextvars.ContextVar(
    "eegbeam_flop_tally", default=None)


def add(stage: str, n: int) -> None:
    tally = _active.get()
    if tally is not None:
        tally[stage] += int(n)


@contextlib.contextmanager
def counting() -> Iterator[Tally]:
    """Collect multiply-add counts for the duration of the block.

    Nested blocks each receive the counts of their own body; the outer
    block also receives the inner counts.
    """
    outer = _active.get()
    tally = Tally()
    token = _active.set(tally)
    try:
        yield tally
    finally:
        _active.reset(token)
        if outer is not None:
            with _merge_lock:
                outer.update(tally)


# Closed-form counts for the dense kernels used in this package.

def matvec(rows: int, cols: int) -> int:
    return rows * cols


def gram(k: int, n: int) -> int:
    """X @ X.T for a k x n block, full (non-symmetric) evaluation."""
    return k * k * n


def lu_inverse(k: int) -> int:
    """Partial-pivot LU plus forward/back substitution against the identity."""
    factor = sum(j * j for j in range(1, k))   # rank-one updates of the trailing block
    factor += sum(range(1, k))                  # multiplier divisions
    solve = k * (k * (k - 1) // 2) * 2 + k * k  # two triangular solves per rhs, plus diagonal
    return factor + solve
