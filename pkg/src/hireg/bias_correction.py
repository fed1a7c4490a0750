"""Bias estimation for regularized estimates from paired least-squares estimates.

Least squares is unbiased under zero-mean noise, so the average of
``x_hr - x_ls`` over many measurements estimates the bias of the regularized
estimator.  :class:`SlidingWindow` keeps the latest ``l`` of those differences
and reports their mean once it is full.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import DimensionError

__all__ = ["DEFAULT_WINDOW", "SlidingWindow", "batch_bias", "window_push", "window_bias", "correct"]

DEFAULT_WINDOW = 200


def batch_bias(hr_estimates, ls_estimates) -> np.ndarray:
    """Mean of ``hr_t - ls_t`` over paired estimates."""
    hr = np.asarray(hr_estimates, dtype=float)
    ls = np.asarray(ls_estimates, dtype=float)
    if hr.ndim != 2 or hr.shape[0] == 0:
        raise DimensionError("need a non-empty list of estimate vectors")
    if hr.shape != ls.shape:
        raise DimensionError(f"estimate lists differ in shape: {hr.shape} vs {ls.shape}")
    return np.mean(hr - ls, axis=0)


class SlidingWindow:
    """FIFO buffer of the latest ``capacity`` differences ``x_hr - x_ls``.

    Ticks count measurements, not wall-clock time.  The bias estimate stays
    zero until ``capacity`` differences have been pushed.

    Parameters
    ----------
    capacity : int
        Window length ``l``.
    dim : int
        Dimension of the state vector.
    t0 : int
        Tick of the first measurement.
    """

    def __init__(self, capacity: int = DEFAULT_WINDOW, dim: int = 3, t0: int = 0):
        if capacity < 1:
            raise ValueError(f"window capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.dim = int(dim)
        self.t0 = int(t0)
        self.tc = self.t0 - 1
        self._entries: deque[np.ndarray] = deque(maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[np.ndarray]:
        return [e.copy() for e in self._entries]

    @property
    def full(self) -> bool:
        return len(self._entries) == self.capacity

    def push(self, delta, tick: int | None = None) -> SlidingWindow:
        delta = np.asarray(delta, dtype=float)
        if delta.shape != (self.dim,):
            raise DimensionError(f"expected a difference vector of shape ({self.dim},), got {delta.shape}")
        self._entries.append(delta.copy())
        self.tc = self.tc + 1 if tick is None else int(tick)
        return self

    def bias(self) -> np.ndarray:
        if not self.full:
            return np.zeros(self.dim)
        # summed afresh so the result does not drift over long streams
        return np.sum(np.stack(self._entries), axis=0) / self.capacity

    def correct(self, hr_estimate) -> np.ndarray:
        hr_estimate = np.asarray(hr_estimate, dtype=float)
        if hr_estimate.shape != (self.dim,):
            raise DimensionError(f"estimate of shape {hr_estimate.shape} does not match window dimension {self.dim}")
        return hr_estimate - self.bias()


def window_push(w: SlidingWindow, delta) -> SlidingWindow:
    return w.push(delta)


def window_bias(w: SlidingWindow) -> np.ndarray:
    return w.bias()


def correct(hr_estimate, w: SlidingWindow) -> np.ndarray:
    return w.correct(hr_estimate)
