"""Maximum-likelihood detection of double-chirp preambles.

For every end device (ED) the gateway tracks the bin-combined preamble
signal (BCP)

    Z[n] = Re{ V1^H V2 } / L,

where V1, V2 are the phase-corrected bins of the ED's two chirps collected
over the L antennas.  A window of N BCP samples spaced one symbol apart is
classified by comparing three Gaussian-mixture likelihoods: a (partial)
preamble, noise, and a preamble resembled jointly by two other EDs.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np
import scipy.fft as sfft
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .css import ChirpTable, dft_bins
from .errors import ConfigurationError, DimensionError
from .preamble import AssignmentPlan
from .sliding_dft import SlidingDft, twiddle

LOG_2PI = math.log(2 * math.pi)


class Gaussian:
    """Multivariate normal with its Cholesky factor, inverse and log-determinant."""

    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.cov = np.asarray(cov, dtype=np.float64)
        if not np.allclose(self.cov, self.cov.T, rtol=0, atol=0):
            raise AssertionError("covariance is not symmetric")
        try:
            self.chol = cho_factor(self.cov, lower=True)
        except np.linalg.LinAlgError as exc:
            raise AssertionError(f"covariance is not positive definite: {exc}") from None
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(self.chol[0]))))
        self.inv = cho_solve(self.chol, np.eye(len(self.mean)))
        self._norm = -0.5 * (len(self.mean) * LOG_2PI + self.logdet)

    def logpdf(self, z) -> float:
        d = np.asarray(z, dtype=np.float64) - self.mean
        return self._norm - 0.5 * float(d @ cho_solve(self.chol, d))


def _block_cov(n, p, var_peak, var_noise, cross):
    cov = np.diag(np.r_[np.full(p, var_peak), np.full(n - p, var_noise)])
    block = cov[:p, :p]
    block[~np.eye(p, dtype=bool)] = cross
    return cov


@dataclass(frozen=True)
class DetectorParams:
    """Variances and the precomputed Gaussian machinery for one operating point.

    ``first_pp[p]``/``last_pp[p]`` hold the preamble hypotheses with the
    first/last ``p`` window entries being preamble peaks, ``first_rpp[p]``/
    ``last_rpp[p]`` the resembled ones.  Index 0 is the all-noise case.
    """

    m: int
    l: int
    n: int
    noise_var: float
    n_thr: int
    sigma_n_sq: float
    sigma_pp_sq: float
    sigma_r_sq: float
    pp_cross: float
    rpp_cross: float
    first_pp: tuple
    last_pp: tuple
    first_rpp: tuple
    last_rpp: tuple

    @property
    def peak_mean(self) -> float:
        return self.m / 2

    @property
    def mu(self):
        return [g.mean for g in self.first_pp]

    @property
    def mu_reversed(self):
        return [g.mean for g in self.last_pp]

    def preamble_hypotheses(self) -> List[Gaussian]:
        return (list(self.first_pp[self.n_thr:self.n + 1])
                + list(self.last_pp[self.n_thr:self.n]))

    def resembled_hypotheses(self) -> List[Gaussian]:
        return list(self.first_rpp[1:self.n + 1]) + list(self.last_rpp[1:self.n])


def variances(m, l, noise_var):
    """(noise, preamble-peak, resembled-peak) BCP variances."""
    s2 = noise_var
    sigma_n_sq = s2 * s2 / (2 * l)
    sigma_pp_sq = m * m / (4 * l) + m * s2 / (2 * l) + sigma_n_sq
    sigma_r_sq = m * m / (8 * l) + m * s2 / (2 * l) + sigma_n_sq
    return sigma_n_sq, sigma_pp_sq, sigma_r_sq


def make_params(m: int, l: int, n: int, sigma_sq: float, n_thr: int) -> DetectorParams:
    for name, value in (("m", m), ("l", l), ("n", n), ("sigma_sq", sigma_sq),
                        ("n_thr", n_thr)):
        if not value > 0:
            raise ConfigurationError(f"{name} must be positive, got {value}")
    if n_thr > n:
        raise ConfigurationError(f"n_thr={n_thr} exceeds the preamble length n={n}")
    sigma_n_sq, sigma_pp_sq, sigma_r_sq = variances(m, l, sigma_sq)
    pp_cross = m * m / (4 * l)
    rpp_cross = m * m / (8 * l)
    flip = slice(None, None, -1)
    first_pp, last_pp, first_rpp, last_rpp = [], [], [], []
    for p in range(n + 1):
        mu = np.r_[np.full(p, m / 2), np.zeros(n - p)]
        sigma = _block_cov(n, p, sigma_pp_sq, sigma_n_sq, pp_cross)
        psi = _block_cov(n, p, sigma_r_sq, sigma_n_sq, rpp_cross)
        first_pp.append(Gaussian(mu, sigma))
        last_pp.append(Gaussian(mu[flip], sigma[flip, flip]))
        first_rpp.append(Gaussian(np.zeros(n), psi))
        last_rpp.append(Gaussian(np.zeros(n), psi[flip, flip]))
    return DetectorParams(m, l, n, float(sigma_sq), n_thr, sigma_n_sq, sigma_pp_sq,
                          sigma_r_sq, pp_cross, rpp_cross, tuple(first_pp), tuple(last_pp),
                          tuple(first_rpp), tuple(last_rpp))


def bcp(spectra, kappa1: int, kappa2: int, l: Optional[int] = None) -> float:
    """BCP sample from the ``(L, M)`` phase-corrected bins of one instant."""
    v = np.atleast_2d(np.asarray(spectra))
    if l is None:
        l = v.shape[0]
    if v.shape[0] != l:
        raise DimensionError(f"expected {l} antenna spectra, got {v.shape[0]}")
    return float(np.real(np.vdot(v[:, kappa1], v[:, kappa2])) / l)


def _window(z, params):
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (params.n,):
        raise DimensionError(f"BCP window has shape {z.shape}, expected ({params.n},)")
    return z


def log_likelihood_noise(z, params: DetectorParams) -> float:
    z = _window(z, params)
    s = params.sigma_n_sq
    return float(-(z @ z) / (2 * s) - 0.5 * params.n * math.log(2 * math.pi * s))


def log_likelihood_preamble(z, params: DetectorParams) -> float:
    z = _window(z, params)
    return float(logsumexp([g.logpdf(z) for g in params.preamble_hypotheses()]))


def log_likelihood_resembled(z, params: DetectorParams) -> float:
    z = _window(z, params)
    return float(logsumexp([g.logpdf(z) for g in params.resembled_hypotheses()]))


def log_likelihoods(z, params: DetectorParams):
    """(preamble, noise, resembled) log-likelihoods of one window."""
    return (log_likelihood_preamble(z, params), log_likelihood_noise(z, params),
            log_likelihood_resembled(z, params))


def decide(z, params: DetectorParams) -> bool:
    lp, ln, lr = log_likelihoods(z, params)
    return lp > np.logaddexp(ln, lr)


# --- vectorised evaluation -------------------------------------------------
#
# Every hypothesis covariance is block diagonal: an equicorrelated p x p
# block (diagonal a + c, off-diagonal c) and sigma_n^2 times the identity.
# Its quadratic form and determinant therefore follow from prefix sums, which
# evaluates all hypotheses of many windows in O(N) per window.

def _lse(x, axis=-1):
    top = np.max(x, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    return np.log(np.sum(np.exp(x - top), axis=axis)) + np.squeeze(top, axis)


def _prefix(x):
    out = np.zeros(x.shape[:-1] + (x.shape[-1] + 1,))
    np.cumsum(x, axis=-1, out=out[..., 1:])
    return out


def _family_logpdf(d1, d2, z2_tail, var_peak, cross, var_noise, p, n):
    """Log-densities of "the first p entries are peaks" for every p in ``p``.

    ``d1``/``d2`` are prefix sums of d and d^2 with d = z - peak mean (length
    N + 1 on the last axis) and ``z2_tail[..., p]`` the sum of z^2 over
    entries p..N-1.
    """
    a = var_peak - cross
    sum_d = d1[..., p]
    quad = (d2[..., p] - cross / (a + p * cross) * sum_d ** 2) / a + z2_tail[..., p] / var_noise
    logdet = (p - 1) * math.log(a) + np.log(a + p * cross) + (n - p) * math.log(var_noise)
    return -0.5 * (quad + logdet + n * LOG_2PI)


def batch_log_likelihoods(windows, params: DetectorParams):
    """(preamble, noise, resembled) log-likelihoods for an ``(..., N)`` array of windows."""
    z = np.asarray(windows, dtype=np.float64)
    if z.shape[-1] != params.n:
        raise DimensionError(f"windows have length {z.shape[-1]}, expected {params.n}")
    n, s = params.n, params.sigma_n_sq
    zr = z[..., ::-1]
    # sums over the last N - p entries, taken directly rather than by
    # subtraction: small noise variances amplify any cancellation
    fwd2, rev2 = _prefix(z * z), _prefix(zr * zr)
    tail_fwd, tail_rev = rev2[..., ::-1], fwd2[..., ::-1]
    ln = -fwd2[..., -1] / (2 * s) - 0.5 * n * math.log(2 * math.pi * s)
    d, dr = z - params.peak_mean, zr - params.peak_mean
    p_first = np.arange(params.n_thr, n + 1)
    p_last = np.arange(params.n_thr, n)
    pp = [_family_logpdf(_prefix(d), _prefix(d * d), tail_fwd, params.sigma_pp_sq,
                         params.pp_cross, s, p_first, n),
          _family_logpdf(_prefix(dr), _prefix(dr * dr), tail_rev, params.sigma_pp_sq,
                         params.pp_cross, s, p_last, n)]
    r_first = np.arange(1, n + 1)
    r_last = np.arange(1, n)
    rp = [_family_logpdf(_prefix(z), fwd2, tail_fwd, params.sigma_r_sq,
                         params.rpp_cross, s, r_first, n),
          _family_logpdf(_prefix(zr), rev2, tail_rev, params.sigma_r_sq,
                         params.rpp_cross, s, r_last, n)]
    lp = _lse(np.concatenate(pp, axis=-1))
    lr = _lse(np.concatenate(rp, axis=-1))
    return lp, ln, lr


def batch_decide(windows, params: DetectorParams) -> np.ndarray:
    lp, ln, lr = batch_log_likelihoods(windows, params)
    return lp > np.logaddexp(ln, lr)


# --- streaming detection ---------------------------------------------------

class DetectionEvent(NamedTuple):
    ed_id: int
    sample_index: int
    log_likelihoods: tuple

    @property
    def ll_preamble(self):
        return self.log_likelihoods[0]

    @property
    def ll_noise(self):
        return self.log_likelihoods[1]

    @property
    def ll_resembled(self):
        return self.log_likelihoods[2]


def _check_consistent(stream, plan, params, table):
    if not (plan.m == params.m == table.m == stream.m):
        raise ConfigurationError(
            f"inconsistent M: plan {plan.m}, params {params.m}, table {table.m}, "
            f"stream {stream.m}")
    if plan.n_preamble != params.n:
        raise ConfigurationError(
            f"plan uses N={plan.n_preamble} but detector params N={params.n}")
    if stream.n_antennas != params.l:
        raise ConfigurationError(
            f"stream has {stream.n_antennas} antennas, params expect L={params.l}")


def run_detection(stream, plan: AssignmentPlan, params: DetectorParams, table: ChirpTable,
                  *, engine: str = "sliding", chunk: Optional[int] = None
                  ) -> List[DetectionEvent]:
    """Scan a reception stream sample by sample and report each ED's first detection.

    Window ``n`` covers samples ``n .. n+M-1``; an event's ``sample_index`` is
    the newest sample ``n + M - 1``.  An ED that fires is latched and never
    examined again; the scan stops early once every ED has fired.

    ``engine="sliding"`` advances one recursive DFT per antenna per sample.
    ``engine="batch"`` computes the same bins chunk-wise with FFT matched
    filters, which is much faster in NumPy and is what the Monte Carlo
    harness uses.
    """
    _check_consistent(stream, plan, params, table)
    if engine == "sliding":
        return _run_sliding(stream, plan, params, table)
    if engine == "batch":
        return _run_batch(stream, plan, params, table, chunk)
    raise ConfigurationError(f"unknown detection engine {engine!r}")


def _run_sliding(stream, plan, params, table):
    y = stream.samples
    m, n = params.m, params.n
    n_windows = y.shape[1] - m + 1
    if n_windows <= 0 or len(plan) == 0:
        return []
    span = (n - 1) * m
    eds = list(plan.assignments)
    k1 = np.array([a.kappa1 for a in eds])
    k2 = np.array([a.kappa2 for a in eds])
    history = np.zeros((n_windows, len(eds)))
    active = np.ones(len(eds), dtype=bool)
    derot = table.derotation
    state = SlidingDft(y[:, :m], table)
    events = []
    taps = np.arange(-span, 1, m)
    for t in range(n_windows):
        if t:
            state.advance(y[:, t + m - 1])
        idx = np.flatnonzero(active)
        v = state.spectrum
        v1 = v[:, k1[idx]] * derot[k1[idx]]
        v2 = v[:, k2[idx]] * derot[k2[idx]]
        history[t, idx] = np.real(np.sum(np.conj(v1) * v2, axis=0)) / params.l
        if t < span:
            continue
        windows = history[t + taps][:, idx].T
        lp, ln, lr = batch_log_likelihoods(windows, params)
        fired = lp > np.logaddexp(ln, lr)
        for j in np.flatnonzero(fired):
            u = idx[j]
            events.append(DetectionEvent(eds[u].ed_id, t + m - 1,
                                         (float(lp[j]), float(ln[j]), float(lr[j]))))
            active[u] = False
        if not active.any():
            break
    return events


class _MatchedFilterBank:
    """Phase-corrected bins of every window start via FFT correlation with chirps."""

    CHAIN_MAX = 4

    def __init__(self, table: ChirpTable):
        self.table = table
        self._cache: Dict[tuple, np.ndarray] = {}

    def kernels(self, nfft, bins):
        out = []
        for k in bins:
            key = (nfft, int(k))
            g = self._cache.get(key)
            if g is None:
                g = np.conj(sfft.fft(self.table.chirps[k], nfft)) / math.sqrt(self.table.m)
                self._cache[key] = g
            out.append(g)
        return np.array(out)

    def corrected(self, y, start, count, bins):
        """Array (L, len(bins), count): corrected bins of windows start..start+count-1.

        Bins within ``CHAIN_MAX`` of the previous requested bin are derived
        from it with the one-sample sliding recursion instead of an FFT.
        """
        table = self.table
        m = table.m
        bins = [int(k) for k in bins]
        out = np.empty((y.shape[0], len(bins), count), dtype=np.complex128)
        direct = [i for i, k in enumerate(bins)
                  if i == 0 or not 0 < k - bins[i - 1] <= self.CHAIN_MAX]
        seg = y[:, start:start + count + m - 1]
        nfft = sfft.next_fast_len(seg.shape[1])
        spec = sfft.fft(seg, nfft, axis=-1)
        prod = spec[:, None, :] * self.kernels(nfft, [bins[i] for i in direct])[None, :, :]
        out[:, direct, :] = sfft.ifft(prod, axis=-1)[..., :count]
        chained = [i for i in range(len(bins)) if i not in set(direct)]
        if not chained:
            return out
        scale = 1 / math.sqrt(m)
        alpha = twiddle(m)
        # raw-bin input of every step: (y[n + M - 1] - y[n - 1]) / sqrt(M)
        step = (seg[:, m:m + count - 1] - seg[:, :count - 1]) * scale
        first = dft_bins(seg[:, :m], table)
        derot = table.derotation
        for i in chained:
            k0, k = bins[i - 1], bins[i]
            raw = out[:, i - 1, :] / derot[k0]
            for j in range(k0 + 1, k + 1):
                nxt = np.empty_like(raw)
                nxt[:, 0] = first[:, j]
                np.add(raw[:, :-1], step, out=nxt[:, 1:])
                nxt[:, 1:] *= alpha[j]
                raw = nxt
            out[:, i, :] = raw * derot[k]
        return out


def _re_inner(v, i1, i2, l):
    """Re{V1^H V2} / L for every ED pair of bin rows, shape (n_eds, count)."""
    return np.real(np.sum(np.conj(v[:, i1, :]) * v[:, i2, :], axis=0)) / l


def bcp_series(stream, plan: AssignmentPlan, table: ChirpTable) -> np.ndarray:
    """BCP of every ED at every window start, shape ``(T - M + 1, n_eds)``."""
    y = stream.samples
    m = table.m
    count = y.shape[1] - m + 1
    if count <= 0 or len(plan) == 0:
        return np.zeros((max(count, 0), len(plan)))
    eds = list(plan.assignments)
    bins = sorted({k for a in eds for k in a.bins})
    pos = {k: i for i, k in enumerate(bins)}
    v = _MatchedFilterBank(table).corrected(y, 0, count, bins)
    i1 = [pos[a.kappa1] for a in eds]
    i2 = [pos[a.kappa2] for a in eds]
    return _re_inner(v, i1, i2, y.shape[0]).T


def _run_batch(stream, plan, params, table, chunk=None):
    y = stream.samples
    m, n = params.m, params.n
    n_windows = y.shape[1] - m + 1
    if n_windows <= 0 or len(plan) == 0:
        return []
    if chunk is None:
        chunk = 8 * m
    span = (n - 1) * m
    eds = list(plan.assignments)
    history = np.zeros((n_windows, len(eds)))
    active = np.ones(len(eds), dtype=bool)
    bank = _MatchedFilterBank(table)
    taps = np.arange(-span, 1, m)
    events = []
    for start in range(0, n_windows, chunk):
        count = min(chunk, n_windows - start)
        idx = np.flatnonzero(active)
        bins = sorted({k for u in idx for k in eds[u].bins})
        pos = {k: i for i, k in enumerate(bins)}
        v = bank.corrected(y, start, count, bins)
        i1 = [pos[eds[u].kappa1] for u in idx]
        i2 = [pos[eds[u].kappa2] for u in idx]
        z = _re_inner(v, i1, i2, params.l)
        history[start:start + count, idx] = z.T
        first = max(start, span)
        if first >= start + count:
            continue
        times = np.arange(first, start + count)
        windows = history[times[:, None] + taps[None, :]][:, :, idx]
        windows = np.moveaxis(windows, 2, 0)
        lp, ln, lr = batch_log_likelihoods(windows, params)
        fired = lp > np.logaddexp(ln, lr)
        for j, u in enumerate(idx):
            hits = np.flatnonzero(fired[j])
            if hits.size:
                h = hits[0]
                events.append((times[h], eds[u].ed_id,
                               (float(lp[j, h]), float(ln[j, h]), float(lr[j, h]))))
                active[u] = False
        if not active.any():
            break
    events.sort(key=lambda e: e[0])
    return [DetectionEvent(ed, int(t) + m - 1, ll) for t, ed, ll in events]


# --- event CSV -------------------------------------------------------------

EVENT_FIELDS = ("ed_id", "sample_index", "ll_preamble", "ll_noise", "ll_resembled")


def write_events_csv(events: Sequence[DetectionEvent], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENT_FIELDS)
        for e in events:
            writer.writerow([e.ed_id, e.sample_index] + [repr(float(x)) for x in e.log_likelihoods])


def read_events_csv(path) -> List[DetectionEvent]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [DetectionEvent(int(r["ed_id"]), int(r["sample_index"]),
                               (float(r["ll_preamble"]), float(r["ll_noise"]),
                                float(r["ll_resembled"])))
                for r in reader]
