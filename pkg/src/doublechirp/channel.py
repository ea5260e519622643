"""Asynchronous multiuser uplink: Rayleigh block fading, AWGN, superposition."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .css import ChirpTable
from .errors import ConfigurationError, DimensionError
from .preamble import PreambleAssignment, build_preamble_symbol

PAYLOAD_BOUNDS = (20, 30)


def complex_normal(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Circular complex Gaussian samples with variance ``var``."""
    shape = tuple(np.atleast_1d(shape))
    z = rng.standard_normal(shape + (2,))
    z *= np.sqrt(var / 2)
    return z.view(np.complex128)[..., 0]


def draw_channel(l_antennas: int, rng: np.random.Generator) -> np.ndarray:
    """One ED's channel to the gateway: ``L`` i.i.d. CN(0, 1) gains."""
    if l_antennas < 1:
        raise ConfigurationError(f"need at least one antenna, got {l_antennas}")
    return complex_normal(rng, l_antennas)


def draw_toas(n_users: int, m: int, rng: np.random.Generator, *, warmup: int = 0,
              mean_gap: Optional[float] = None) -> List[int]:
    """Sorted arrival times; gaps are exponential (mean one symbol) rounded to samples."""
    if n_users < 1:
        raise ConfigurationError(f"need at least one end device, got {n_users}")
    if mean_gap is None:
        mean_gap = m
    gaps = np.rint(rng.exponential(mean_gap, size=n_users - 1)).astype(np.int64)
    return [int(warmup)] + [int(warmup + g) for g in np.cumsum(gaps)]


@dataclass
class PacketPlan:
    ed_id: int
    toa: int
    payload_symbols: List[int]
    assignment: PreambleAssignment

    def samples(self, table: ChirpTable, n_preamble: int) -> np.ndarray:
        pre = np.tile(build_preamble_symbol(self.assignment, table), n_preamble)
        payload = table.chirps[np.asarray(self.payload_symbols, dtype=np.int64)].ravel()
        return np.concatenate([pre, payload])

    def length(self, m: int, n_preamble: int) -> int:
        return (n_preamble + len(self.payload_symbols)) * m


def make_packet(assignment: PreambleAssignment, toa: int, payload_len: int,
                rng: np.random.Generator) -> PacketPlan:
    symbols = rng.integers(assignment.m, size=payload_len).tolist()
    return PacketPlan(assignment.ed_id, int(toa), symbols, assignment)


def build_packet(assignment: PreambleAssignment, n_preamble: int, payload_len: int,
                 rng: np.random.Generator, table: ChirpTable) -> np.ndarray:
    """N double-chirp preamble symbols followed by random unit-power data chirps."""
    return make_packet(assignment, 0, payload_len, rng).samples(table, n_preamble)


@dataclass
class ReceptionStream:
    """Per-antenna received samples, shape ``(L, T)``."""

    samples: np.ndarray
    noise_var: float
    m: int
    packets: List[PacketPlan] = field(default_factory=list)

    @property
    def n_antennas(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    def dump(self, path) -> None:
        write_stream(self, path)


def synthesize(packets: Sequence[PacketPlan], channels, noise_var: float, l_antennas: int,
               t: int, table: ChirpTable, n_preamble: int,
               rng: Optional[np.random.Generator] = None) -> ReceptionStream:
    """Superpose all packets through their channels and add AWGN.

    ``channels`` maps ED id to its length-L gain vector (a sequence aligned
    with ``packets`` also works).
    """
    if noise_var < 0:
        raise ConfigurationError(f"noise variance must be non-negative, got {noise_var}")
    if not isinstance(channels, dict):
        channels = {p.ed_id: h for p, h in zip(packets, channels)}
    if noise_var > 0:
        if rng is None:
            raise ConfigurationError("a random generator is required when noise_var > 0")
        y = complex_normal(rng, (l_antennas, t), noise_var)
    else:
        y = np.zeros((l_antennas, t), dtype=np.complex128)
    for p in packets:
        x = p.samples(table, n_preamble)
        end = p.toa + x.size
        if p.toa < 0 or end > t:
            raise ConfigurationError(
                f"packet of ED {p.ed_id} spans samples {p.toa}..{end - 1}, "
                f"outside the stream of length {t}")
        h = np.asarray(channels[p.ed_id], dtype=np.complex128)
        if h.shape != (l_antennas,):
            raise DimensionError(f"channel of ED {p.ed_id} has shape {h.shape}, "
                                 f"expected ({l_antennas},)")
        y[:, p.toa:end] += h[:, None] * x[None, :]
    return ReceptionStream(y, float(noise_var), table.m, list(packets))


# binary stream dump: 32-byte header, then antenna-major interleaved float64
MAGIC = b"CNIQ"
VERSION = 1
_HEADER = struct.Struct("<4sIIIId4x")


def write_stream(stream: ReceptionStream, path) -> None:
    header = _HEADER.pack(MAGIC, VERSION, stream.n_antennas, stream.length, stream.m,
                          stream.noise_var)
    data = np.ascontiguousarray(stream.samples, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_stream(path) -> ReceptionStream:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigurationError(f"{path}: truncated header")
    magic, version, l, t, m, noise_var = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigurationError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ConfigurationError(f"{path}: unsupported version {version}")
    body = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if body.size != l * t:
        raise ConfigurationError(f"{path}: expected {l * t} samples, found {body.size}")
    return ReceptionStream(body.reshape(l, t).astype(np.complex128), noise_var, m)
