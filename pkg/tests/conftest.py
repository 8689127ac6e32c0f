import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from voicewell.signal_io import SAMPLE_RATE, Waveform

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def tone(freq_hz, seconds=1.0, amp=0.5, sr=SAMPLE_RATE, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return amp * np.sin(2 * np.pi * freq_hz * t + phase)


def sawtooth(freq_hz, seconds=1.0, amp=0.5, sr=SAMPLE_RATE):
    t = np.arange(int(round(seconds * sr))) / sr
    return amp * (2.0 * ((t * freq_hz) % 1.0) - 1.0)


def pulse_harmonics(freq_hz, seconds=1.0, amp=0.5, sr=SAMPLE_RATE, n_harm=10):
    """Equal-amplitude harmonics below Nyquist: a band-limited pulse train."""
    t = np.arange(int(round(seconds * sr))) / sr
    x = np.zeros_like(t)
    for k in range(1, n_harm + 1):
        if k * freq_hz < sr / 2:
            x += np.cos(2 * np.pi * k * freq_hz * t)
    return amp * x / np.abs(x).max()


def wave(samples):
    return Waveform(np.asarray(samples, dtype=np.float64), SAMPLE_RATE)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
