"""WAV decoding, canonical 16 kHz resampling and framing."""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import EmptyAudio, UnsupportedFormat

SAMPLE_RATE = 16000
FRAME_LENGTH = 400  # 25 ms at 16 kHz
HOP_LENGTH = 160  # 10 ms at 16 kHz
PRE_EMPHASIS = 0.97
MIN_INPUT_RATE = 8000
MAX_INPUT_RATE = 48000


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class FrameStream:
    """Hamming-windowed, pre-emphasized frames plus the source signal.

    ``frames`` feeds the spectral extractors. Pitch and voice-quality
    analysis need the untapered, unfiltered signal, available through
    ``samples`` and :meth:`raw_frames`.
    """

    frames: np.ndarray
    samples: np.ndarray
    hop_samples: int = HOP_LENGTH
    window_fn: str = "hamming"
    sample_rate_hz: int = SAMPLE_RATE

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_length(self) -> int:
        return self.frames.shape[1]

    def raw_frames(self) -> np.ndarray:
        return _slice_frames(self.samples, self.frame_length, self.hop_samples)


def frame_count(n_samples: int, frame_length: int = FRAME_LENGTH, hop: int = HOP_LENGTH) -> int:
    if n_samples < frame_length:
        return 0
    return (n_samples - frame_length) // hop + 1


def _slice_frames(x: np.ndarray, frame_length: int, hop: int) -> np.ndarray:
    n = frame_count(len(x), frame_length, hop)
    windows = np.lib.stride_tricks.sliding_window_view(x, frame_length)
    return windows[: (n - 1) * hop + 1 : hop]


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # scipy left-justifies 24-bit PCM into int32
        return data.astype(np.float64) / 2147483648.0
    if data.dtype == np.float32 or data.dtype == np.float64:
        return np.clip(data.astype(np.float64), -1.0, 1.0)
    raise UnsupportedFormat(f"unsupported sample type {data.dtype}")


def resample(x: np.ndarray, rate_in: int, rate_out: int = SAMPLE_RATE) -> np.ndarray:
    """Band-limited (windowed-sinc FIR) rational resampling."""
    if rate_in == rate_out:
        return np.asarray(x, dtype=np.float64)
    g = gcd(rate_in, rate_out)
    y = resample_poly(x, rate_out // g, rate_in // g, window=("kaiser", 8.0))
    return np.clip(y, -1.0, 1.0)


def canonicalize(samples: np.ndarray, sample_rate: int) -> Waveform:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if not np.all(np.isfinite(x)):
        raise UnsupportedFormat("non-finite samples")
    y = resample(x, sample_rate)
    if len(y) < FRAME_LENGTH:
        raise EmptyAudio(f"{len(y)} samples after resampling; need at least {FRAME_LENGTH}")
    return Waveform(y, SAMPLE_RATE)


def decode_wav(path: str | Path) -> Waveform:
    """Read a PCM WAV file as a mono 16 kHz waveform in [-1, 1]."""
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except Exception as exc:  # the WAV parser surfaces malformed headers as assorted exception types
        raise UnsupportedFormat(f"{path}: {type(exc).__name__}: {exc}") from exc
    if data.ndim == 2 and data.shape[1] not in (1, 2):
        raise UnsupportedFormat(f"{path}: {data.shape[1]} channels")
    if not MIN_INPUT_RATE <= rate <= MAX_INPUT_RATE:
        raise UnsupportedFormat(f"{path}: sample rate {rate} Hz outside 8-48 kHz")
    return canonicalize(_to_float(data), rate)


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    """Write 16-bit PCM."""
    pcm = np.round(np.clip(samples, -1.0, 32767 / 32768) * 32768.0).astype(np.int16)
    wavfile.write(str(path), sample_rate, pcm)


def frame(w: Waveform, pre_emphasis: float = PRE_EMPHASIS) -> FrameStream:
    if not 0.0 <= pre_emphasis < 1.0:
        raise ValueError("pre_emphasis must lie in [0, 1)")
    x = np.asarray(w.samples, dtype=np.float64)
    if frame_count(len(x)) == 0:
        raise EmptyAudio("no full frame fits")
    raw = _slice_frames(x, FRAME_LENGTH, HOP_LENGTH)
    # per-frame filter: each frame's first sample passes unchanged
    emphasized = raw.copy()
    emphasized[:, 1:] -= pre_emphasis * raw[:, :-1]
    return FrameStream(frames=emphasized * np.hamming(FRAME_LENGTH), samples=x)
