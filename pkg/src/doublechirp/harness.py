"""Monte Carlo preamble-error-rate experiments.

Each trial draws fresh channels, arrival times and payloads for all EDs from
a generator seeded by ``(master_seed, trial_index)``, synthesizes the
multi-antenna stream, runs the detector and scores every ED.  The same
trial index reuses the same draws at every SNR point (noise is scaled, not
redrawn), so curves are smooth in SNR and comparable across configurations.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .channel import draw_channel, draw_toas, make_packet, synthesize
from .css import build_chirp_table
from .detector import make_params, run_detection
from .errors import ConfigurationError
from .preamble import (POLICIES, assign_preambles, max_users, same_delta_plan,
                       validate_assignment)

log = logging.getLogger(__name__)

Z95 = 1.959963984540054
CSV_FIELDS = ("snr_db", "per_overall", "per_missed", "per_wrong", "trials", "ci_halfwidth")
CORRECT, MISSED, WRONG = "correct", "missed", "wrong"


def default_snr_grid():
    return [float(x) for x in range(-20, 1)]


@dataclass
class SimConfig:
    sf: int = 7
    l_antennas: int = 32
    n_users: int = 1
    n_preamble: int = 8
    n_thr: int = 4
    snr_grid_db: List[float] = field(default_factory=default_snr_grid)
    trials: int = 2000
    master_seed: int = 0
    policy: str = "sequential"
    payload_min: int = 20
    payload_max: int = 30
    toa_mean_gap: Optional[float] = None
    same_delta: int = 30
    engine: str = "batch"

    @property
    def m(self) -> int:
        return 1 << self.sf

    def validate(self) -> "SimConfig":
        build_chirp_table(self.sf)
        for name in ("l_antennas", "n_users", "n_preamble", "n_thr", "trials"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_thr > self.n_preamble:
            raise ConfigurationError(
                f"n_thr={self.n_thr} exceeds n_preamble={self.n_preamble}")
        if self.n_users > max_users(self.m):
            raise ConfigurationError(
                f"n_users={self.n_users} exceeds M/2 - 1 = {max_users(self.m)}")
        if not 0 <= self.payload_min <= self.payload_max:
            raise ConfigurationError(
                f"bad payload bounds {self.payload_min}..{self.payload_max}")
        if self.policy not in POLICIES + ("same-delta",):
            raise ConfigurationError(f"unknown assignment policy {self.policy!r}")
        if self.toa_mean_gap is not None and self.toa_mean_gap <= 0:
            raise ConfigurationError("toa_mean_gap must be positive")
        return self

    def replace(self, **changes) -> "SimConfig":
        data = asdict(self)
        data.update(changes)
        return SimConfig(**data)


def build_plan(config: SimConfig):
    if config.policy == "same-delta":
        return same_delta_plan(config.n_users, config.m, config.same_delta, config.n_preamble)
    return assign_preambles(config.n_users, config.m, config.policy, config.master_seed,
                            config.n_preamble)


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(trial_index)]))


def snr_to_noise_var(snr_db: float) -> float:
    """Per-sample, per-antenna SNR of one unit-power ED through a unit-variance channel."""
    return 10.0 ** (-snr_db / 10.0)


def correct_span(toa: int, m: int, n: int):
    """Event instants credited to a packet arriving at ``toa``.

    From half a symbol before the first preamble symbol completes to half a
    symbol after the last one has left the N-symbol BCP window.
    """
    return toa + m - 1 - m // 2, toa + (2 * n - 1) * m - 1 + m // 2


@dataclass
class TrialOutcome:
    snr_db: float
    trial_index: int
    status: Dict[int, str]
    events: list = field(default_factory=list, repr=False)
    toas: Dict[int, int] = field(default_factory=dict)

    def count(self, kind: str) -> int:
        return sum(1 for s in self.status.values() if s == kind)


def score(events, packets, m: int, n: int) -> Dict[int, str]:
    """Classify every transmitting ED as correct, missed or wrong."""
    status = {p.ed_id: MISSED for p in packets}
    toa = {p.ed_id: p.toa for p in packets}
    for e in events:
        if e.ed_id not in status:
            continue
        lo, hi = correct_span(toa[e.ed_id], m, n)
        status[e.ed_id] = CORRECT if lo <= e.sample_index <= hi else WRONG
    return status


class _TrialRunner:
    """Per-process cache of the plan, chirp table and detector parameters."""

    def __init__(self, config: SimConfig):
        self.config = config.validate()
        self.table = build_chirp_table(config.sf)
        self.plan = build_plan(config)
        self._params = {}

    def params(self, noise_var):
        p = self._params.get(noise_var)
        if p is None:
            c = self.config
            p = make_params(c.m, c.l_antennas, c.n_preamble, noise_var, c.n_thr)
            self._params[noise_var] = p
        return p

    def draw(self, trial_index):
        c, m, n = self.config, self.config.m, self.config.n_preamble
        rng = trial_rng(c.master_seed, trial_index)
        warmup = n * m
        toas = draw_toas(c.n_users, m, rng, warmup=warmup, mean_gap=c.toa_mean_gap)
        order = rng.permutation(c.n_users)
        packets, channels = [], {}
        for slot, a in zip(order, self.plan.assignments):
            length = int(rng.integers(c.payload_min, c.payload_max + 1))
            packets.append(make_packet(a, toas[slot], length, rng))
            channels[a.ed_id] = draw_channel(c.l_antennas, rng)
        t = max(p.toa + p.length(m, n) for p in packets) + n * m
        return packets, channels, t, rng

    def run(self, trial_index, snr_db, keep_events=False) -> TrialOutcome:
        c = self.config
        noise_var = snr_to_noise_var(snr_db)
        packets, channels, t, rng = self.draw(trial_index)
        stream = synthesize(packets, channels, noise_var, c.l_antennas, t, self.table,
                            c.n_preamble, rng)
        events = run_detection(stream, self.plan, self.params(noise_var), self.table,
                               engine=c.engine)
        status = score(events, packets, c.m, c.n_preamble)
        return TrialOutcome(snr_db, trial_index, status, events if keep_events else [],
                            {p.ed_id: p.toa for p in packets})


def run_trial(config: SimConfig, trial_index: int, snr_db: float,
              keep_events: bool = False) -> TrialOutcome:
    """One trial at one SNR; deterministic in ``(config, trial_index, snr_db)``."""
    return _TrialRunner(config).run(trial_index, snr_db, keep_events)


@dataclass
class PerPoint:
    snr_db: float
    trials: int
    packets: int
    missed: int
    wrong: int

    @property
    def per_overall(self) -> float:
        return (self.missed + self.wrong) / self.packets if self.packets else 0.0

    @property
    def per_missed(self) -> float:
        return self.missed / self.packets if self.packets else 0.0

    @property
    def per_wrong(self) -> float:
        return self.wrong / self.packets if self.packets else 0.0

    @staticmethod
    def halfwidth(rate: float, count: int) -> float:
        return Z95 * math.sqrt(rate * (1 - rate) / count) if count else 0.0

    @property
    def ci_halfwidth(self) -> float:
        return self.halfwidth(self.per_overall, self.packets)

    def ci(self, kind: str = "overall"):
        rate = getattr(self, f"per_{kind}")
        w = self.halfwidth(rate, self.packets)
        return rate - w, rate + w


@dataclass
class PerResult:
    points: List[PerPoint]
    config: Optional[SimConfig] = None

    @property
    def snr_db(self):
        return np.array([p.snr_db for p in self.points])

    @property
    def per(self):
        return np.array([p.per_overall for p in self.points])

    def crossing(self, target: float = 1e-3) -> float:
        return snr_at_per(self.snr_db, self.per, target)


def snr_at_per(snr_db, per, target=1e-3) -> float:
    """SNR where a decreasing PER curve first reaches ``target``.

    Interpolates log10(PER) linearly between the two grid points that
    bracket the target; a zero PER is treated as one error below the
    resolution so the bracket stays finite.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    per = np.asarray(per, dtype=float)
    order = np.argsort(snr_db)
    snr_db, per = snr_db[order], per[order]
    below = np.flatnonzero(per <= target)
    if below.size == 0:
        return math.nan
    i = below[0]
    if i == 0:
        # crossed before the grid starts, unless it lands exactly on it
        return float(snr_db[0]) if per[0] == target else math.nan
    x0, x1 = snr_db[i - 1], snr_db[i]
    y0 = math.log10(per[i - 1])
    y1 = math.log10(max(per[i], target / 10))
    if y1 == y0:
        return float(x1)
    return float(x0 + (math.log10(target) - y0) * (x1 - x0) / (y1 - y0))


def _run_block(config: SimConfig, snr_db: float, indices: Sequence[int]):
    runner = _TrialRunner(config)
    missed = wrong = 0
    for i in indices:
        out = runner.run(i, snr_db)
        missed += out.count(MISSED)
        wrong += out.count(WRONG)
    return missed, wrong


def run_experiment(config: SimConfig, *, threads: int = 1,
                   progress: Optional[Callable[[str], None]] = None) -> PerResult:
    """PER, missed and wrong rates at every SNR grid point."""
    config.validate()
    threads = max(1, int(threads))
    points = []
    pool = ProcessPoolExecutor(threads) if threads > 1 else None
    try:
        runner = None if pool else _TrialRunner(config)
        for snr in config.snr_grid_db:
            if pool:
                blocks = np.array_split(np.arange(config.trials), threads)
                futures = [pool.submit(_run_block, config, snr, b.tolist()) for b in blocks]
                counts = [f.result() for f in futures]
            else:
                counts = []
                for i in range(config.trials):
                    out = runner.run(i, snr)
                    counts.append((out.count(MISSED), out.count(WRONG)))
            missed = sum(c[0] for c in counts)
            wrong = sum(c[1] for c in counts)
            pt = PerPoint(float(snr), config.trials, config.trials * config.n_users,
                          missed, wrong)
            points.append(pt)
            msg = (f"snr={snr:+.2f} dB per={pt.per_overall:.6f} "
                   f"missed={pt.per_missed:.6f} wrong={pt.per_wrong:.6f}")
            log.info(msg)
            if progress:
                progress(msg)
    finally:
        if pool:
            pool.shutdown()
    return PerResult(points, config)


def emit_csv(result: PerResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for p in result.points:
            writer.writerow([f"{p.snr_db:.6f}", f"{p.per_overall:.6f}", f"{p.per_missed:.6f}",
                             f"{p.per_wrong:.6f}", str(p.trials), f"{p.ci_halfwidth:.6f}"])


def read_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "trials" else float(v)) for k, v in r.items()} for r in rows]


# --- config files ----------------------------------------------------------

_LIST_KEYS = {"snr_grid_db"}
_NULLABLE = {"toa_mean_gap"}


def parse_config(text: str, base: Optional[SimConfig] = None) -> SimConfig:
    """Parse ``key = value`` lines (``#`` comments, lists comma-separated)."""
    types = {f.name: f.type for f in fields(SimConfig)}
    values = asdict(base) if base is not None else asdict(SimConfig())
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        try:
            if key in _LIST_KEYS:
                values[key] = [float(v) for v in value.split(",") if v.strip()]
            elif key in _NULLABLE and value.lower() in ("", "none"):
                values[key] = None
            elif key in _NULLABLE:
                values[key] = float(value)
            elif key in ("policy", "engine"):
                values[key] = value
            else:
                values[key] = int(value)
        except ValueError:
            raise ConfigurationError(
                f"config line {lineno}: bad value {value!r} for {key}") from None
    return SimConfig(**values).validate()


def load_config(path) -> SimConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def format_config(config: SimConfig) -> str:
    lines = []
    for key, value in asdict(config).items():
        if isinstance(value, list):
            value = ", ".join(f"{v:g}" for v in value)
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"


def default_threads() -> int:
    return os.cpu_count() or 1
