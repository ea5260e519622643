"""Chirp spread spectrum primitives: chirp table, dechirping, bin demodulation.

Conventions
-----------
Samples are 0-based, so sample ``m`` here is sample ``m + 1`` of the usual
1-based chirp definition.  The DFT is unitary (``norm="ortho"``): a chirp of
unit-modulus samples lands in its bin with magnitude ``sqrt(M)`` and white
noise of variance ``sigma^2`` keeps variance ``sigma^2`` in every bin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DimensionError

SF_MIN, SF_MAX = 5, 12


def basic_upchirp(m: int) -> np.ndarray:
    """Samples of the basic upchirp ``exp(j2pi(m^2/2M - m/2))``, m = 0..M-1."""
    idx = np.arange(m, dtype=np.float64)
    # reduce the phase mod 1 before exponentiating to keep sample 0 exact
    phase = np.mod(idx * idx / (2 * m) - idx / 2, 1.0)
    return np.exp(2j * np.pi * phase)


def bin_phase(m: int) -> np.ndarray:
    """Deterministic phase offset theta_k = 2pi(k^2/2M - k/2) of every bin."""
    k = np.arange(m, dtype=np.float64)
    return 2 * np.pi * np.mod(k * k / (2 * m) - k / 2, 1.0)


@dataclass(frozen=True, eq=False)
class ChirpTable:
    """All ``M`` cyclic shifts of the basic upchirp for one spreading factor.

    ``chirps[i, m]`` is sample ``m`` of chirp ``i`` and equals
    ``chirps[0, (m + i) % M]``.  The arrays are read-only.
    """

    sf: int
    m: int
    chirps: np.ndarray = field(repr=False)
    derotation: np.ndarray = field(repr=False)

    @property
    def base(self) -> np.ndarray:
        return self.chirps[0]

    def chirp(self, index: int) -> np.ndarray:
        return self.chirps[index % self.m]


@lru_cache(maxsize=None)
def build_chirp_table(sf: int) -> ChirpTable:
    """Precompute the chirp table for ``sf`` (cached, shared read-only)."""
    if isinstance(sf, bool) or not isinstance(sf, (int, np.integer)):
        raise ConfigurationError(f"spreading factor must be an integer, got {sf!r}")
    if not SF_MIN <= sf <= SF_MAX:
        raise ConfigurationError(
            f"spreading factor {sf} outside supported range {SF_MIN}..{SF_MAX}")
    m = 1 << int(sf)
    base = basic_upchirp(m)
    rows = (np.arange(m)[:, None] + np.arange(m)[None, :]) % m
    chirps = base[rows]
    derotation = np.exp(-1j * bin_phase(m))
    chirps.setflags(write=False)
    derotation.setflags(write=False)
    return ChirpTable(int(sf), m, chirps, derotation)


def _check_window(window, table: ChirpTable) -> np.ndarray:
    window = np.asarray(window, dtype=np.complex128)
    if window.shape[-1:] != (table.m,):
        raise DimensionError(
            f"window length {window.shape[-1:] or window.shape} does not match M={table.m}")
    return window


def dechirp(window, table: ChirpTable) -> np.ndarray:
    """Multiply a window (or a stack of windows) by the conjugate basic chirp."""
    window = _check_window(window, table)
    return window * np.conj(table.base)


@dataclass(frozen=True, eq=False)
class BinSpectrum:
    """DFT of a dechirped window before (``values``) and after phase removal."""

    values: np.ndarray
    corrected: np.ndarray

    @property
    def m(self) -> int:
        return self.values.shape[-1]


def dft_bins(window, table: ChirpTable) -> np.ndarray:
    """Raw bin values ``V[k]`` of the dechirped window (unitary DFT)."""
    return np.fft.fft(dechirp(window, table), norm="ortho")


def demod_bins(window, table: ChirpTable) -> BinSpectrum:
    values = dft_bins(window, table)
    return BinSpectrum(values, values * table.derotation)


def square_law_combine(spectra) -> np.ndarray:
    """Per-bin power summed over antennas: ``sum_l |corrected_l[k]|^2``.

    ``spectra`` is a sequence of :class:`BinSpectrum` (one per antenna) or an
    ``(L, M)`` array of corrected bin values.
    """
    if isinstance(spectra, np.ndarray):
        corrected = spectra
    else:
        spectra = list(spectra)
        if not spectra:
            raise DimensionError("square-law combining needs at least one antenna")
        sizes = {s.m for s in spectra}
        if len(sizes) != 1:
            raise DimensionError(f"spectra have mismatched lengths {sorted(sizes)}")
        corrected = np.stack([s.corrected for s in spectra])
    if corrected.ndim != 2 or corrected.shape[0] == 0:
        raise DimensionError("square-law combining needs an (L, M) array with L >= 1")
    return np.sum(corrected.real ** 2 + corrected.imag ** 2, axis=0)
