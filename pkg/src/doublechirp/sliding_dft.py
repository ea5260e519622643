"""Recursive per-sample update of the dechirped-window DFT.

Sliding the window one sample to the right changes the raw bin vector as

    V'[k] = a[k] * (V[k - 1] + (y_new - y_old) / sqrt(M)),
    a[k]  = exp(j*pi*(1 - 1/M)) * exp(j*2*pi*k/M),

where ``y_old`` is the sample leaving the window and ``y_new`` the one
entering it.  One update costs O(M); the full transform is only needed to
start the recursion and to periodically clear accumulated rounding error.
"""
from __future__ import annotations

import numpy as np

from .css import ChirpTable, dft_bins
from .errors import DimensionError

RESYNC_PERIOD_SYMBOLS = 16


def twiddle(m: int) -> np.ndarray:
    k = np.arange(m)
    return np.exp(1j * np.pi * (1 - 1 / m)) * np.exp(2j * np.pi * k / m)


class SlidingDft:
    """Sliding dechirped DFT over one or several antenna streams.

    The state holds an ``(L, M)`` spectrum (a 1-D window gives ``L = 1`` and
    1-D outputs), a ring buffer with the last ``M`` raw samples per antenna
    and the sample counter ``position`` (index of the oldest sample in the
    window, in stream time).
    """

    def __init__(self, window, table: ChirpTable, *, resync_period=None, position=0):
        window = np.asarray(window, dtype=np.complex128)
        if window.shape[-1:] != (table.m,) or window.ndim > 2:
            raise DimensionError(
                f"window shape {window.shape} does not match M={table.m}")
        self._squeeze = window.ndim == 1
        self.table = table
        self.m = table.m
        self.alpha = twiddle(self.m)
        self._scale = 1 / np.sqrt(self.m)
        self.window = np.atleast_2d(window).copy()
        self._head = 0
        self.position = position
        if resync_period is None:
            resync_period = RESYNC_PERIOD_SYMBOLS * self.m
        self.resync_period = resync_period
        self.advances = 0
        self.complex_ops = 0
        self._since_resync = 0
        self.spectrum = dft_bins(self.window, table)

    @property
    def n_antennas(self) -> int:
        return self.window.shape[0]

    def current_window(self) -> np.ndarray:
        w = np.roll(self.window, -self._head, axis=1)
        return w[0] if self._squeeze else w

    def bins(self) -> np.ndarray:
        """Raw bin values V (``(M,)`` or ``(L, M)``)."""
        return self.spectrum[0] if self._squeeze else self.spectrum

    def corrected(self) -> np.ndarray:
        """Phase-corrected bins, the same quantity as ``BinSpectrum.corrected``."""
        out = self.spectrum * self.table.derotation
        return out[0] if self._squeeze else out

    def advance(self, new_sample) -> "SlidingDft":
        """Slide the window by one sample; ``new_sample`` has one value per antenna."""
        new = np.broadcast_to(np.asarray(new_sample, dtype=np.complex128),
                              (self.n_antennas,))
        old = self.window[:, self._head]
        delta = (new - old) * self._scale
        spec = np.roll(self.spectrum, 1, axis=1)
        spec += delta[:, None]
        spec *= self.alpha
        self.spectrum = spec
        self.window[:, self._head] = new
        self._head = (self._head + 1) % self.m
        self.position += 1
        self.advances += 1
        # shift + one add + one multiply per bin
        self.complex_ops += 2 * self.m * self.n_antennas
        self._since_resync += 1
        if self.resync_period and self._since_resync >= self.resync_period:
            self.resync()
        return self

    def resync(self) -> "SlidingDft":
        """Recompute the spectrum from the ring buffer with a full transform."""
        self.spectrum = dft_bins(np.roll(self.window, -self._head, axis=1), self.table)
        self._since_resync = 0
        return self


def init(window, table: ChirpTable, **kwargs) -> SlidingDft:
    return SlidingDft(window, table, **kwargs)


def advance(state: SlidingDft, new_sample) -> SlidingDft:
    return state.advance(new_sample)


def resync(state: SlidingDft) -> SlidingDft:
    return state.resync()
