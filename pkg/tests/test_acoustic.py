import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import toeplitz

from voicewell import acoustic
from voicewell.acoustic import (
    FRAME_FEATURE_NAMES,
    LOG_FLOOR,
    N_MEL,
    PROSODY_NAMES,
    STATIC_NAMES,
    VOICE_QUALITY_NAMES,
    deltas,
    frame_features,
    levinson_durbin,
    lpc,
    mel_energies,
    mel_filterbank,
    mfcc,
    plp,
    prosody,
    stack_deltas,
    supervector,
    track_pitch,
    voice_quality,
)
from voicewell.errors import DegenerateFrame
from voicewell.signal_io import frame

from conftest import pulse_harmonics, sawtooth, tone, wave

F0 = PROSODY_NAMES.index("f0_hz")
VOICING = PROSODY_NAMES.index("voicing_prob")
HNR = VOICE_QUALITY_NAMES.index("hnr_db")
JITTER = VOICE_QUALITY_NAMES.index("jitter_local")


def test_supervector_is_41_and_matrix_is_123():
    assert len(STATIC_NAMES) == 41
    assert len(FRAME_FEATURE_NAMES) == len(set(FRAME_FEATURE_NAMES)) == 123
    m = frame_features(wave(tone(200, 0.5)))
    assert m.values.shape == (frame(wave(tone(200, 0.5))).n_frames, 123)


# --- MFCC -------------------------------------------------------------------


def test_silence_mfcc_is_dct_of_log_floor():
    c = mfcc(frame(wave(np.zeros(4000))))
    # orthonormal DCT-II of a constant vector: only c0 = sqrt(N) * value
    np.testing.assert_allclose(c[:, 0], np.sqrt(N_MEL) * np.log(LOG_FLOOR), rtol=1e-12)
    np.testing.assert_allclose(c[:, 1:], 0.0, atol=1e-9)


def test_1khz_tone_peaks_in_filter_nearest_1khz():
    fs = frame(wave(tone(1000, 0.3)))
    _, centers = mel_filterbank()
    # oracle: dominant DFT bin of a windowed frame, then nearest filter centre
    spec = np.abs(np.fft.rfft(fs.frames[5], 512))
    peak_hz = np.argmax(spec) * 16000 / 512
    expected = int(np.argmin(np.abs(centers - peak_hz)))
    assert expected == int(np.argmin(np.abs(centers - 1000)))
    assert np.all(np.argmax(mel_energies(fs), axis=1) == expected)


def test_mfcc_gain_shifts_only_c0(rng):
    x = rng.normal(0, 0.1, 8000)
    a = mfcc(frame(wave(x)))
    b = mfcc(frame(wave(2 * x)))
    np.testing.assert_allclose(b[:, 1:], a[:, 1:], atol=1e-6)
    np.testing.assert_allclose(b[:, 0] - a[:, 0], np.sqrt(N_MEL) * np.log(4.0), atol=1e-6)


# --- LP / PLP -----------------------------------------------------------------


def test_levinson_first_order_by_hand():
    a, err = levinson_durbin([1.0, 0.5], 1)
    assert a[1] == pytest.approx(-0.5, abs=1e-15)
    assert err == pytest.approx(0.75, abs=1e-15)


def test_levinson_rejects_non_positive_definite():
    with pytest.raises(DegenerateFrame):
        levinson_durbin([0.0, 0.0, 0.0], 2)


@given(st.integers(0, 10_000), st.integers(1, 16))
@settings(max_examples=60)
def test_levinson_satisfies_normal_equations(seed, order):
    x = np.random.default_rng(seed).normal(size=256)
    r = np.array([x[: len(x) - k] @ x[k:] for k in range(order + 1)]) / len(x)
    a, _ = levinson_durbin(r, order)
    residual = toeplitz(r[:order]) @ a[1:] + r[1 : order + 1]
    assert np.linalg.norm(residual) <= 1e-8


def test_white_noise_lpc_coefficients_are_small():
    x = np.random.default_rng(5).normal(size=(100, 400))
    a, _ = lpc(x, 12)
    # each coefficient ~ N(0, 1/400): sd 0.05 per frame
    assert np.max(np.abs(a[:, 1:].mean(axis=0))) < 0.03
    assert np.mean(np.abs(a[:, 1:])) < 0.1


def test_zero_energy_plp_is_all_zero():
    assert not plp(frame(wave(np.zeros(2000)))).any()


def test_plp_cepstra_gain_invariant(rng):
    x = rng.normal(0, 0.1, 8000)
    a = plp(frame(wave(x)))
    b = plp(frame(wave(3 * x)))
    np.testing.assert_allclose(b[:, 1:], a[:, 1:], atol=1e-6)
    assert np.ptp(b[:, 0] - a[:, 0]) < 1e-6


# --- pitch and prosody ----------------------------------------------------------


def test_sawtooth_200hz_f0_within_2hz():
    f0 = track_pitch(frame(wave(sawtooth(200, 1.0)))).f0_hz
    voiced = f0 > 0
    assert voiced.mean() > 0.9
    assert np.mean(np.abs(f0[voiced] - 200) <= 2) >= 0.95


@pytest.mark.parametrize("make", [sawtooth, pulse_harmonics])
@pytest.mark.parametrize("f0_true", [100, 150, 250, 350])
def test_periodic_f0_within_one_percent(make, f0_true):
    f0 = track_pitch(frame(wave(make(f0_true, 1.0)))).f0_hz
    voiced = f0 > 0
    assert voiced.mean() > 0.9
    assert np.mean(np.abs(f0[voiced] - f0_true) <= 0.01 * f0_true) >= 0.95


def test_white_noise_is_mostly_unvoiced():
    x = np.random.default_rng(3).normal(0, 0.3, 16000)
    p = prosody(frame(wave(x)))
    low = p[:, VOICING] < acoustic.VOICING_THRESHOLD
    assert low.mean() >= 0.9
    assert np.all(p[low, F0] == 0)


def test_silence_prosody():
    p = prosody(frame(wave(np.zeros(4000))))
    np.testing.assert_allclose(p[:, 0], np.log(LOG_FLOOR))
    assert not p[:, PROSODY_NAMES.index("zcr")].any()
    assert not p[:, F0].any()


def test_voiced_f0_inside_search_range(rng):
    x = sawtooth(120, 0.5) + rng.normal(0, 0.05, 8000)
    f0 = supervector(frame(wave(x)))[:, len(acoustic.MFCC_NAMES) * 2 + F0]
    voiced = f0 > 0
    assert np.all((f0[voiced] >= 60) & (f0[voiced] <= 400))


# --- voice quality ------------------------------------------------------------------


def test_pure_sine_has_no_jitter_and_clamped_hnr():
    fs = frame(wave(tone(200, 1.0)))
    pitch = track_pitch(fs)
    vq = voice_quality(fs, pitch.f0_hz)
    voiced = pitch.f0_hz > 0
    assert voiced.mean() > 0.9
    assert np.all(vq[voiced, JITTER] <= 0.005)
    assert np.all(vq[voiced, HNR] == 40.0)


def test_unvoiced_frames_emit_zeros():
    fs = frame(wave(np.random.default_rng(0).normal(0, 0.2, 8000)))
    vq = voice_quality(fs, np.zeros(fs.n_frames))
    assert not vq.any()


def test_zero_db_snr_gives_hnr_near_zero():
    clean = tone(200, 2.0, amp=1.0)
    noise = np.random.default_rng(11).normal(0, np.sqrt(0.5), len(clean))  # sine power 0.5
    x = (clean + noise) / 5
    fs = frame(wave(x))
    vq = voice_quality(fs, np.full(fs.n_frames, 200.0))
    assert abs(np.median(vq[:, HNR])) <= 2.0


def test_hnr_stays_in_clamp_range(rng):
    x = sawtooth(150, 1.0) + rng.normal(0, 0.2, 16000)
    sv = supervector(frame(wave(x)))
    hnr = sv[:, 13 + 13 + 8 + HNR]
    assert np.all((hnr >= -20) & (hnr <= 40))


# --- deltas ---------------------------------------------------------------------


def test_constant_sequence_has_zero_deltas():
    m = stack_deltas(np.full((20, 41), 3.5)).values
    assert not m[:, 41:].any()


def test_ramp_delta_is_one_inside():
    d = deltas(np.arange(20, dtype=float)[:, None])
    np.testing.assert_allclose(d[2:-2, 0], 1.0, atol=1e-12)


def test_single_frame_deltas_are_zero():
    m = stack_deltas(np.arange(41, dtype=float)[None, :]).values
    assert m.shape == (1, 123) and not m[:, 41:].any()


@given(
    st.integers(400, 3000),
    st.floats(0.0, 1.0),
    st.integers(0, 2**31),
)
@settings(max_examples=25)
def test_random_waveforms_give_finite_123_columns(n, amp, seed):
    x = np.random.default_rng(seed).uniform(-amp, amp, n)
    m = frame_features(wave(x)).values
    assert m.shape[1] == 123
    assert np.all(np.isfinite(m))
