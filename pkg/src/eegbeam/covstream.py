"""Batch and sliding-window channel covariance.

The streaming path keeps the *scatter* matrix ``sum x x^T`` of the current
window. Subtracting the oldest block's scatter and adding the newest one is
then an exact identity; normalization by ``ns - 1`` and the ridge are applied
only when the covariance is read out. Data should be centered once up front
(for example with the channel means of the first window); per-window mean
removal would break the add/subtract identity.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import flops
from .errors import DataError, ParameterError, RankRequirementError


@dataclass(frozen=True)
class EegWindow:
    """A k-channel by N-sample block of real-valued signal."""

    data: np.ndarray
    sample_rate: float | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DataError(f"EEG data must be a non-empty k x N matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError("EEG data contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def k(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def columns(self, start: int, stop: int) -> "EegWindow":
        return EegWindow(self.data[:, start:stop], self.sample_rate)


def as_data(X) -> np.ndarray:
    return X.data if isinstance(X, EegWindow) else EegWindow(X).data


def scatter(X) -> np.ndarray:
    """Uncentered scatter ``X X^T``."""
    data = as_data(X)
    k, n = data.shape
    flops.add("covariance", flops.gram(k, n))
    return data @ data.T


def batch_covariance(X, center: bool = True) -> np.ndarray:
    """Sample covariance of the rows of ``X``.

    Parameters
    ----------
    X : EegWindow or array, shape (k, N)
    center : bool
        Remove each channel's mean first. Without centering the result is
        the scatter divided by ``N - 1`` (by 1 when ``N == 1``), the
        convention of the sliding estimator.
    """
    data = as_data(X)
    n = data.shape[1]
    if center:
        if n < 2:
            raise DataError("centered covariance needs at least 2 samples")
        data = data - data.mean(axis=1, keepdims=True)
    return scatter(data) / max(n - 1, 1)


@dataclass(frozen=True)
class ScatterDelta:
    """Change of the window scatter caused by one slide.

    The matrix form is ``added @ added.T - evicted @ evicted.T``; the
    columns themselves are kept so the inverse can be updated one
    rank-one term per sample.
    """

    added: np.ndarray
    evicted: np.ndarray

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.added @ self.added.T - self.evicted @ self.evicted.T


@dataclass(frozen=True)
class CovarianceState:
    """Scatter and inverse of a sliding window of ``ns`` samples.

    ``buffer`` is a ring holding the window's columns; ``head`` is the slot
    of the oldest one. ``inverse`` refers to ``covariance(state)`` and is
    only trustworthy while ``inverse_valid`` is set.
    """

    k: int
    ns: int
    cy: int
    scatter: np.ndarray
    inverse: np.ndarray
    buffer: np.ndarray = field(repr=False)
    head: int = 0
    window_start: int = 0
    ridge: float = 0.0
    updates_applied: int = 0
    inverse_valid: bool = True
    fallbacks: int = 0
    refreshes: int = 0
    since_refresh: int = 0

    def window(self) -> np.ndarray:
        """The window's samples in time order, shape (k, ns)."""
        return np.roll(self.buffer, -self.head, axis=1)


def check_window_params(k: int, ns: int, cy: int) -> None:
    if ns < k:
        raise RankRequirementError(
            f"window length ns={ns} is below the channel count k={k}; the "
            "covariance would be rank deficient (full-rank requirement ns >= k)")
    if not 1 <= cy < ns / 2:
        raise ParameterError(f"block size cy={cy} must satisfy 1 <= cy < ns/2 = {ns / 2:g}")


def covariance(state: CovarianceState) -> np.ndarray:
    """Exposed covariance ``scatter / (ns - 1) + ridge * I``."""
    C = state.scatter / (state.ns - 1)
    if state.ridge:
        C = C + state.ridge * np.eye(state.k)
    return C


def init_state(X, cy: int, ridge: float = 0.0) -> CovarianceState:
    """Start a sliding window on the ``ns = N`` columns of ``X``.

    Raises
    ------
    RankRequirementError
        ``ns < k``.
    ParameterError
        ``cy`` outside ``1 <= cy < ns/2`` or negative ridge.
    SingularMatrixError
        The regularized covariance is singular; raise ``ridge``.
    """
    from .millerinv import symmetric_inverse

    data = as_data(X)
    k, ns = data.shape
    check_window_params(k, ns, cy)
    if ridge < 0 or not np.isfinite(ridge):
        raise ParameterError(f"ridge must be a finite non-negative number, got {ridge}")
    S = scatter(data)
    state = CovarianceState(k=k, ns=ns, cy=cy, scatter=S, inverse=np.empty((k, k)),
                            buffer=data.copy(), ridge=float(ridge))
    return dataclasses.replace(state, inverse=symmetric_inverse(covariance(state)))


def slide(state: CovarianceState, new_block) -> tuple[CovarianceState, ScatterDelta]:
    """Advance the window by one block of ``cy`` samples.

    Returns the new state and the scatter delta. The inverse in the returned
    state is *not* updated; pass the delta to
    :func:`eegbeam.millerinv.recursive_inverse_slide`.
    """
    block = np.asarray(new_block, dtype=float)
    if block.ndim == 1:
        block = block[:, None]
    if block.shape != (state.k, state.cy):
        raise DataError(f"new block must have shape {(state.k, state.cy)}, got {block.shape}")
    if not np.all(np.isfinite(block)):
        raise DataError("new block contains non-finite values")
    slots = (state.head + np.arange(state.cy)) % state.ns
    evicted = state.buffer[:, slots]
    delta = ScatterDelta(added=block.copy(), evicted=evicted)
    flops.add("covariance", 2 * flops.gram(state.k, state.cy))
    new_scatter = state.scatter - evicted @ evicted.T + block @ block.T
    new_scatter = 0.5 * (new_scatter + new_scatter.T)
    buffer = state.buffer.copy()
    buffer[:, slots] = block
    return dataclasses.replace(
        state, scatter=new_scatter, buffer=buffer,
        head=(state.head + state.cy) % state.ns,
        window_start=state.window_start + state.cy), delta
