"""Frame-level acoustic descriptors.

Every frame gets a 41-dimensional supervector::

    13 MFCC  (c0..c12)
    13 PLP   (log prediction gain, c1..c12)
     8 prosody
     7 voice quality

which :func:`stack_deltas` extends with regression deltas and delta-deltas
to 123 columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct, irfft, next_fast_len, rfft

from .errors import DegenerateFrame
from .signal_io import FrameStream, Waveform, frame

LOG_FLOOR = 1e-10
NFFT = 512
N_MEL = 26
N_MFCC = 13
N_BARK = 17
PLP_ORDER = 12
F0_MIN = 60.0
F0_MAX = 400.0
VOICING_THRESHOLD = 0.45
# among NCCF peaks within this fraction of the best, the shortest lag wins (octave guard)
OCTAVE_TOLERANCE = 0.95
HNR_RANGE = (-20.0, 40.0)
DELTA_WINDOW = 2
VQ_NEIGHBORHOOD = 2  # frames either side of the analysed frame

MFCC_NAMES = tuple(f"mfcc_{i}" for i in range(N_MFCC))
PLP_NAMES = tuple(f"plp_{i}" for i in range(PLP_ORDER + 1))
PROSODY_NAMES = (
    "log_energy",
    "f0_hz",
    "voicing_prob",
    "zcr",
    "spectral_centroid",
    "spectral_flux",
    "spectral_rolloff95",
    "loudness",
)
VOICE_QUALITY_NAMES = (
    "jitter_local",
    "jitter_rap",
    "shimmer_local",
    "shimmer_apq3",
    "hnr_db",
    "spectral_tilt",
    "cpp",
)
STATIC_NAMES = MFCC_NAMES + PLP_NAMES + PROSODY_NAMES + VOICE_QUALITY_NAMES
FRAME_FEATURE_NAMES = (
    STATIC_NAMES
    + tuple(f"{n}_d" for n in STATIC_NAMES)
    + tuple(f"{n}_dd" for n in STATIC_NAMES)
)
assert len(STATIC_NAMES) == 41 and len(FRAME_FEATURE_NAMES) == 123


@dataclass(frozen=True)
class FrameFeatureMatrix:
    values: np.ndarray  # (frames, 123)
    names: tuple[str, ...] = FRAME_FEATURE_NAMES

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


# --------------------------------------------------------------------------
# spectra and filterbanks


def power_spectrum(frames: np.ndarray, nfft: int = NFFT) -> np.ndarray:
    return np.abs(rfft(frames, nfft, axis=-1)) ** 2 / nfft


def bin_frequencies(nfft: int = NFFT, sample_rate: int = 16000) -> np.ndarray:
    return np.arange(nfft // 2 + 1) * sample_rate / nfft


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=None)
def mel_filterbank(
    n_filters: int = N_MEL, nfft: int = NFFT, sample_rate: int = 16000, fmin: float = 0.0, fmax: float = 8000.0
) -> tuple[np.ndarray, np.ndarray]:
    """Triangular mel filters evaluated at the exact bin frequencies.

    Returns ``(weights, centers_hz)`` with weights of shape
    ``(n_filters, nfft // 2 + 1)``.
    """
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    freqs = bin_frequencies(nfft, sample_rate)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    weights = np.clip(np.minimum(rising, falling), 0.0, None)
    weights.flags.writeable = False
    centers = edges[1:-1].copy()
    centers.flags.writeable = False
    return weights, centers


def hz_to_bark(f):
    return 6.0 * np.arcsinh(np.asarray(f) / 600.0)


def bark_to_hz(z):
    return 600.0 * np.sinh(np.asarray(z) / 6.0)


@lru_cache(maxsize=None)
def bark_filterbank(
    n_bands: int = N_BARK, nfft: int = NFFT, sample_rate: int = 16000, fmax: float = 8000.0
) -> tuple[np.ndarray, np.ndarray]:
    """Critical-band masking curves centred evenly on the Bark scale."""
    top = hz_to_bark(fmax)
    centers_bark = np.linspace(0.0, top, n_bands)
    width = top / (n_bands - 1)
    z = hz_to_bark(bin_frequencies(nfft, sample_rate))[None, :] - centers_bark[:, None]
    z = z / width
    # Schroeder-style skirt: +10 dB/Bark below, -25 dB/Bark above a 1-Bark plateau
    log_w = np.minimum(0.0, np.minimum(z + 0.5, -2.5 * (z - 0.5)))
    weights = 10.0 ** log_w
    weights.flags.writeable = False
    centers = bark_to_hz(centers_bark)
    centers.flags.writeable = False
    return weights, centers


def equal_loudness(freqs_hz: np.ndarray) -> np.ndarray:
    fsq = np.asarray(freqs_hz, dtype=np.float64) ** 2
    return (fsq / (fsq + 1.6e5)) ** 2 * ((fsq + 1.44e6) / (fsq + 9.61e6))


# --------------------------------------------------------------------------
# MFCC


def mel_energies(frames: FrameStream) -> np.ndarray:
    weights, _ = mel_filterbank()
    return power_spectrum(frames.frames) @ weights.T


def mfcc(frames: FrameStream, _power: np.ndarray | None = None) -> np.ndarray:
    power = power_spectrum(frames.frames) if _power is None else _power
    weights, _ = mel_filterbank()
    log_e = np.log(np.maximum(power @ weights.T, LOG_FLOOR))
    return dct(log_e, type=2, axis=-1, norm="ortho")[:, :N_MFCC]


# --------------------------------------------------------------------------
# linear prediction and PLP


def _levinson_rows(r: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise Levinson-Durbin recursion.

    Returns predictor polynomials ``a`` (``a[:, 0] == 1``), final prediction
    error and a mask of rows that were well-posed.
    """
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    n = r.shape[0]
    ok = r[:, 0] > 0.0
    a = np.zeros((n, order + 1))
    a[:, 0] = 1.0
    err = np.where(ok, r[:, 0], 1.0)
    for i in range(1, order + 1):
        acc = r[:, i] + np.einsum("ij,ij->i", a[:, 1:i], r[:, i - 1 : 0 : -1])
        k = -acc / err
        prev = a[:, 1:i].copy()
        a[:, 1:i] = prev + k[:, None] * prev[:, ::-1]
        a[:, i] = k
        err = err * (1.0 - k * k)
        ok &= err > 0.0
        err = np.where(ok, err, 1.0)
    a[~ok] = 0.0
    a[~ok, 0] = 1.0
    err = np.where(ok, err, 0.0)
    return a, err, ok


def levinson_durbin(r, order: int) -> tuple[np.ndarray, float]:
    """Solve the autocorrelation normal equations for an order-``order`` predictor.

    The predictor polynomial is ``A(z) = 1 + a1 z^-1 + ... + ap z^-p`` so
    that ``toeplitz(r[:p]) @ a[1:] == -r[1:p+1]``. Returns ``(a, error)``.

    >>> a, g = levinson_durbin([1.0, 0.5], 1)
    >>> float(a[1]), float(g)
    (-0.5, 0.75)
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1 or len(r) < order + 1:
        raise ValueError("need a 1-D autocorrelation of length order + 1")
    a, err, ok = _levinson_rows(r[None, : order + 1], order)
    if not ok[0]:
        raise DegenerateFrame("autocorrelation is not positive definite")
    return a[0], float(err[0])


def lpc_to_cepstrum(a: np.ndarray, n_ceps: int) -> np.ndarray:
    """Cepstrum c1..c_n of the all-pole model 1/A(z), row-wise."""
    a = np.atleast_2d(a)
    p = a.shape[1] - 1
    c = np.zeros((a.shape[0], n_ceps + 1))
    for m in range(1, n_ceps + 1):
        acc = -a[:, m] if m <= p else np.zeros(a.shape[0])
        for k in range(max(1, m - p), m):
            acc = acc - (k / m) * c[:, k] * a[:, m - k]
        c[:, m] = acc
    return c[:, 1:]


def lpc(signal_frames: np.ndarray, order: int = PLP_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Autocorrelation-method LPC of time-domain frames."""
    x = np.atleast_2d(signal_frames)
    n = x.shape[1]
    spec = np.abs(rfft(x, 2 * n, axis=-1)) ** 2
    r = irfft(spec, 2 * n, axis=-1)[:, : order + 1]
    a, err, _ = _levinson_rows(r, order)
    return a, err


def plp(frames: FrameStream, _power: np.ndarray | None = None) -> np.ndarray:
    power = power_spectrum(frames.frames) if _power is None else _power
    weights, centers = bark_filterbank()
    auditory = (power @ weights.T) * equal_loudness(centers)
    auditory = np.cbrt(auditory)
    # edge bands carry no loudness-weighted energy; copy their neighbours
    auditory[:, 0] = auditory[:, 1]
    auditory[:, -1] = auditory[:, -2]
    symmetric = np.concatenate([auditory, auditory[:, -2:0:-1]], axis=1)
    r = np.fft.ifft(symmetric, axis=1).real[:, : PLP_ORDER + 1]
    # frames without energy are DegenerateFrame cases: all-zero output
    live = r[:, 0] > LOG_FLOOR
    out = np.zeros((frames.n_frames, PLP_ORDER + 1))
    if np.any(live):
        a, err, ok = _levinson_rows(r[live], PLP_ORDER)
        block = np.zeros((a.shape[0], PLP_ORDER + 1))
        block[ok, 0] = np.log(np.maximum(err[ok], LOG_FLOOR))
        block[ok, 1:] = lpc_to_cepstrum(a[ok], PLP_ORDER)
        out[live] = block
    return out


# --------------------------------------------------------------------------
# pitch and prosody


def _lag_bounds(sample_rate: int) -> tuple[int, int]:
    return int(np.floor(sample_rate / F0_MAX)), int(np.ceil(sample_rate / F0_MIN))


def nccf(raw_frames: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Normalized cross-correlation of each (mean-removed) frame with its lagged self.

    ``out[t, k]`` correlates ``x[0:N-k]`` with ``x[k:N]`` and lies in [-1, 1].
    """
    x = raw_frames - raw_frames.mean(axis=1, keepdims=True)
    n = x.shape[1]
    n_lags = n if max_lag is None else min(n, max_lag + 1)
    nfft = next_fast_len(n + n_lags, real=True)  # no circular wrap up to the last lag
    ac = irfft(np.abs(rfft(x, nfft, axis=1)) ** 2, nfft, axis=1)[:, :n_lags]
    e = np.cumsum(x * x, axis=1)
    lags = np.arange(n_lags)
    head = e[:, n - 1 - lags]  # energy of x[0:N-k]
    tail = e[:, -1:] - np.concatenate([np.zeros((x.shape[0], 1)), e[:, : n_lags - 1]], axis=1)  # x[k:N]
    denom = np.sqrt(np.maximum(head * tail, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 1e-12, ac / denom, 0.0)
    return np.clip(r, -1.0, 1.0 + 1e-9)


def _pitch_nccf(raw_frames: np.ndarray, sample_rate: int) -> np.ndarray:
    return nccf(raw_frames, _lag_bounds(sample_rate)[1] + 2)


@dataclass(frozen=True)
class PitchTrack:
    f0_hz: np.ndarray
    voicing_prob: np.ndarray
    peak_r: np.ndarray  # interpolated NCCF peak, 0 where no candidate


def _parabolic(r: np.ndarray, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows = np.arange(len(idx))
    left, mid, right = r[rows, idx - 1], r[rows, idx], r[rows, idx + 1]
    curv = left - 2.0 * mid + right
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = np.where(curv < 0.0, 0.5 * (left - right) / curv, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    return idx + delta, mid - 0.25 * (left - right) * delta


def track_pitch(frames: FrameStream, _r: np.ndarray | None = None) -> PitchTrack:
    raw = frames.raw_frames()
    r = _pitch_nccf(raw, frames.sample_rate_hz) if _r is None else _r
    lag_lo, lag_hi = _lag_bounds(frames.sample_rate_hz)
    seg = r[:, lag_lo : lag_hi + 1]
    prev = r[:, lag_lo - 1 : lag_hi]
    nxt = r[:, lag_lo + 1 : lag_hi + 2]
    is_peak = (seg >= prev) & (seg > nxt) & (seg > 0.0)
    # compare peaks by their interpolated heights: integer lags undersample short periods
    curv = prev - 2.0 * seg + nxt
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = np.clip(np.where(curv < 0.0, 0.5 * (prev - nxt) / curv, 0.0), -0.5, 0.5)
    height = seg - 0.25 * (prev - nxt) * delta
    peak_vals = np.where(is_peak, height, -np.inf)
    best = peak_vals.max(axis=1)
    has_peak = np.isfinite(best)
    candidates = is_peak & (peak_vals >= OCTAVE_TOLERANCE * best[:, None])
    first = np.argmax(candidates, axis=1) + lag_lo
    lag, value = _parabolic(r, np.where(has_peak, first, lag_lo))
    value = np.where(has_peak, np.clip(value, 0.0, 1.0), 0.0)
    f0 = np.where(has_peak, frames.sample_rate_hz / lag, 0.0)
    energy = np.sum((raw - raw.mean(axis=1, keepdims=True)) ** 2, axis=1)
    voiced = (value >= VOICING_THRESHOLD) & (f0 >= F0_MIN) & (f0 <= F0_MAX) & (energy > 1e-8)
    return PitchTrack(np.where(voiced, f0, 0.0), value, np.where(voiced, value, 0.0))


def prosody(frames: FrameStream, _power: np.ndarray | None = None, _pitch: PitchTrack | None = None) -> np.ndarray:
    power = power_spectrum(frames.frames) if _power is None else _power
    pitch = track_pitch(frames) if _pitch is None else _pitch
    raw = frames.raw_frames()
    energy = np.sum(frames.frames ** 2, axis=1)
    log_energy = np.log(np.maximum(energy, LOG_FLOOR))
    zcr = np.sum(raw[:, 1:] * raw[:, :-1] < 0.0, axis=1) / (raw.shape[1] - 1)

    freqs = bin_frequencies(NFFT, frames.sample_rate_hz)
    total = power.sum(axis=1)
    live = total > 0.0
    safe_total = np.where(live, total, 1.0)
    centroid = np.where(live, power @ freqs / safe_total, 0.0)
    cum = np.cumsum(power, axis=1)
    roll_idx = np.argmax(cum >= 0.95 * total[:, None], axis=1)
    rolloff = np.where(live, freqs[roll_idx], 0.0)

    mag = np.sqrt(power)
    mag_sum = mag.sum(axis=1, keepdims=True)
    norm = np.divide(mag, mag_sum, out=np.zeros_like(mag), where=mag_sum > 0.0)
    flux = np.zeros(frames.n_frames)
    flux[1:] = np.sum(np.diff(norm, axis=0) ** 2, axis=1)

    loudness = energy ** 0.3
    return np.column_stack(
        [log_energy, pitch.f0_hz, pitch.voicing_prob, zcr, centroid, flux, rolloff, loudness]
    )


# --------------------------------------------------------------------------
# voice quality


def _voiced_runs(voiced: np.ndarray) -> list[tuple[int, int]]:
    v = np.concatenate([[False], voiced, [False]]).astype(np.int8)
    d = np.diff(v)
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def pitch_marks(
    x: np.ndarray, f0_hz: np.ndarray, hop: int, frame_length: int, sample_rate: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cycle peaks (position, amplitude, voiced-run id) over voiced stretches.

    Peaks are chained one period apart, each searched in [0.7 T, 1.3 T]
    after its predecessor, where T comes from the local f0 estimate;
    position and height are refined by parabolic interpolation.
    """
    pos, amp, run = [], [], []
    n = len(x)
    half = frame_length // 2
    for run_id, (a, b) in enumerate(_voiced_runs(f0_hz > 0)):
        start = a * hop
        stop = min((b - 1) * hop + frame_length, n)
        period = sample_rate / f0_hz[a]
        hi = min(start + int(np.ceil(period)), stop)
        p = start + int(np.argmax(x[start:hi]))
        while True:
            if 0 < p < n - 1:
                l, m, r = x[p - 1], x[p], x[p + 1]
                curv = l - 2.0 * m + r
                d = 0.5 * (l - r) / curv if curv < 0.0 else 0.0
                d = min(max(d, -0.5), 0.5)
                pos.append(p + d)
                amp.append(m - 0.25 * (l - r) * d)
            else:
                pos.append(float(p))
                amp.append(x[p])
            run.append(run_id)
            t = min(max((p - half) // hop, a), b - 1)
            period = sample_rate / f0_hz[t]
            lo = p + int(0.7 * period)
            hi = p + int(1.3 * period) + 1
            if hi > stop:
                break
            p = lo + int(np.argmax(x[lo:hi]))
    return np.asarray(pos, dtype=np.float64), np.asarray(amp, dtype=np.float64), np.asarray(run, dtype=np.int64)


def _window_sum(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    cs = np.concatenate([[0.0], np.cumsum(values)])
    lo = np.clip(lo, 0, len(values))
    hi = np.clip(hi, lo, len(values))
    return cs[hi] - cs[lo]


def _perturbation(
    pos: np.ndarray, amp: np.ndarray, run: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> np.ndarray:
    """Jitter/shimmer (local, rap/apq3) over marks ``lo:hi`` per frame."""
    out = np.zeros((len(lo), 4))
    m = len(pos)
    if m < 4:
        return out
    same = (run[1:] == run[:-1]).astype(np.float64)  # pair j joins marks j, j+1
    period = np.diff(pos) * same
    amp_diff = np.abs(np.diff(amp)) * same

    n_pairs = _window_sum(same, lo, hi - 1)
    sum_period = _window_sum(period, lo, hi - 1)

    both = np.zeros(m - 1)
    both[1:] = same[1:] * same[:-1]
    d_period = np.zeros(m - 1)
    d_period[1:] = np.abs(np.diff(period)) * both[1:]
    n_d = _window_sum(both, lo + 1, hi - 1)
    sum_d = _window_sum(d_period, lo + 1, hi - 1)

    triple = np.zeros(m - 1)
    triple[1:-1] = same[:-2] * same[1:-1] * same[2:]
    rap = np.zeros(m - 1)
    rap[1:-1] = np.abs(period[1:-1] - (period[:-2] + period[1:-1] + period[2:]) / 3.0) * triple[1:-1]
    n_rap = _window_sum(triple, lo + 1, hi - 2)
    sum_rap = _window_sum(rap, lo + 1, hi - 2)

    n_marks = np.clip(hi - lo, 0, None).astype(np.float64)
    sum_amp = _window_sum(amp, lo, hi)
    n_adiff = n_pairs
    sum_adiff = _window_sum(amp_diff, lo, hi - 1)

    apq = np.zeros(m)
    apq_ok = np.zeros(m)
    apq_ok[1:-1] = same[:-1] * same[1:]
    apq[1:-1] = np.abs(amp[1:-1] - (amp[:-2] + amp[1:-1] + amp[2:]) / 3.0) * apq_ok[1:-1]
    n_apq = _window_sum(apq_ok, lo + 1, hi - 1)
    sum_apq = _window_sum(apq, lo + 1, hi - 1)

    with np.errstate(invalid="ignore", divide="ignore"):
        mean_period = sum_period / n_pairs
        mean_amp = sum_amp / n_marks
        jit = np.where((n_d > 0) & (mean_period > 0), (sum_d / n_d) / mean_period, 0.0)
        jrap = np.where((n_rap > 0) & (mean_period > 0), (sum_rap / n_rap) / mean_period, 0.0)
        shim = np.where((n_adiff > 0) & (mean_amp > 0), (sum_adiff / n_adiff) / mean_amp, 0.0)
        sapq = np.where((n_apq > 0) & (mean_amp > 0), (sum_apq / n_apq) / mean_amp, 0.0)
    out[:] = np.column_stack([jit, jrap, shim, sapq])
    return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)


def _spectral_tilt(power: np.ndarray, sample_rate: int) -> np.ndarray:
    """Least-squares slope of the dB spectrum, in dB per kHz."""
    f = bin_frequencies(NFFT, sample_rate) / 1000.0
    fc = f - f.mean()
    db = 10.0 * np.log10(np.maximum(power, LOG_FLOOR))
    return (db - db.mean(axis=1, keepdims=True)) @ fc / (fc @ fc)


def _cepstral_peak_prominence(raw: np.ndarray, sample_rate: int) -> np.ndarray:
    nfft = 1024
    xw = (raw - raw.mean(axis=1, keepdims=True)) * np.hamming(raw.shape[1])
    db = 20.0 * np.log10(np.maximum(np.abs(rfft(xw, nfft, axis=1)), LOG_FLOOR))
    ceps = irfft(db, nfft, axis=1)
    lag_lo, lag_hi = _lag_bounds(sample_rate)
    q = np.arange(lag_lo, nfft // 2)
    c = ceps[:, lag_lo : nfft // 2]
    qc = q - q.mean()
    slope = (c - c.mean(axis=1, keepdims=True)) @ qc / (qc @ qc)
    intercept = c.mean(axis=1) - slope * q.mean()
    band = ceps[:, lag_lo : lag_hi + 1]
    k = np.argmax(band, axis=1)
    peak_q = k + lag_lo
    return band[np.arange(len(k)), k] - (intercept + slope * peak_q)


def voice_quality(
    frames: FrameStream,
    f0_track: np.ndarray,
    _r: np.ndarray | None = None,
    _power: np.ndarray | None = None,
) -> np.ndarray:
    f0 = np.asarray(f0_track, dtype=np.float64)
    n = frames.n_frames
    if f0.shape != (n,):
        raise ValueError("f0 track must have one value per frame")
    out = np.zeros((n, 7))
    voiced = f0 > 0
    if not np.any(voiced):
        return out
    hop, length, sr = frames.hop_samples, frames.frame_length, frames.sample_rate_hz
    raw = frames.raw_frames()

    pos, amp, run = pitch_marks(frames.samples, f0, hop, length, sr)
    t = np.arange(n)
    start = np.maximum(t - VQ_NEIGHBORHOOD, 0) * hop
    stop = np.minimum(t + VQ_NEIGHBORHOOD, n - 1) * hop + length
    lo = np.searchsorted(pos, start, side="left")
    hi = np.searchsorted(pos, stop, side="left")
    perturb = _perturbation(pos, amp, run, lo, hi)

    r = _pitch_nccf(raw, sr) if _r is None else _r
    lag = np.rint(sr / np.where(voiced, f0, sr / 100.0)).astype(np.int64)
    lag = np.clip(lag, 2, r.shape[1] - 2)
    # nearest local maximum within one lag step of the f0 lag
    rows = np.arange(n)
    neigh = np.stack([r[rows, lag - 1], r[rows, lag], r[rows, lag + 1]], axis=1)
    lag = lag + np.argmax(neigh, axis=1) - 1
    _, peak = _parabolic(r, lag)
    peak = np.clip(peak, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        hnr = 10.0 * np.log10(peak / (1.0 - peak))
    hnr = np.clip(np.nan_to_num(hnr, nan=HNR_RANGE[0], posinf=HNR_RANGE[1], neginf=HNR_RANGE[0]), *HNR_RANGE)

    power = power_spectrum(frames.frames) if _power is None else _power
    tilt = _spectral_tilt(power, sr)
    cpp = np.zeros(n)
    cpp[voiced] = _cepstral_peak_prominence(raw[voiced], sr)

    out[:, :4] = perturb
    out[:, 4] = hnr
    out[:, 5] = tilt
    out[:, 6] = cpp
    out[~voiced] = 0.0
    return out


# --------------------------------------------------------------------------
# assembly


def stack_deltas(m: np.ndarray, window: int = DELTA_WINDOW) -> FrameFeatureMatrix:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValueError("need at least one frame")
    d = deltas(m, window)
    dd = deltas(d, window)
    return FrameFeatureMatrix(np.hstack([m, d, dd]))


def deltas(m: np.ndarray, window: int = DELTA_WINDOW) -> np.ndarray:
    """Regression deltas with replicated edge frames."""
    n = m.shape[0]
    padded = np.pad(m, ((window, window), (0, 0)), mode="edge")
    num = np.zeros_like(m)
    for k in range(1, window + 1):
        num += k * (padded[window + k : window + k + n] - padded[window - k : window - k + n])
    return num / (2.0 * sum(k * k for k in range(1, window + 1)))


def supervector(frames: FrameStream) -> np.ndarray:
    """(frames, 41) static descriptors; spectra and NCCF are computed once."""
    power = power_spectrum(frames.frames)
    r = _pitch_nccf(frames.raw_frames(), frames.sample_rate_hz)
    pitch = track_pitch(frames, _r=r)
    parts = [
        mfcc(frames, _power=power),
        plp(frames, _power=power),
        prosody(frames, _power=power, _pitch=pitch),
        voice_quality(frames, pitch.f0_hz, _r=r, _power=power),
    ]
    out = np.hstack(parts)
    return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)


def frame_features(w: Waveform) -> FrameFeatureMatrix:
    return stack_deltas(supervector(frame(w)))
