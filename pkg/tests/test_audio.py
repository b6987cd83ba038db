import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.fft import idct

from geoscale.audio import (
    HAMMING_FLOOR,
    AudioClip,
    CepstraConfig,
    ChannelFilterSpec,
    Spectrogram,
    apply_channel_filter,
    cepstra,
    frame_count,
    load_wav,
    smooth_spectrum,
    smoothing_half_width,
    stft,
    write_wav,
)
from geoscale.exceptions import (
    BandOutOfRange,
    ClipTooShort,
    ConfigMismatch,
    EmptyFile,
    InputError,
    UnsupportedFormat,
    ValidationError,
)


def _write_pcm(path, values, n_channels=1, width=2, rate=8000):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(n_channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        dtype = {1: "u1", 2: "<i2", 4: "<i4"}[width]
        w.writeframes(np.asarray(values, dtype=dtype).tobytes())


# load_wav -----------------------------------------------------------------
@pytest.mark.parametrize("value, expected", [(16384, 0.5), (-32768, -1.0), (0, 0.0)])
def test_load_wav_scaling(tmp_path, value, expected):
    p = tmp_path / "one.wav"
    _write_pcm(p, [value])
    clip = load_wav(p)
    assert clip.samples.tolist() == [expected]
    assert clip.sample_rate_hz == 8000


def test_load_wav_length_matches_header(tmp_path):
    p = tmp_path / "long.wav"
    _write_pcm(p, np.zeros(27 * 8000, dtype=np.int16))
    clip = load_wav(p)
    with wave.open(str(p), "rb") as w:
        assert clip.samples.size == w.getnframes() == 216000


def test_stereo_is_averaged(tmp_path):
    p = tmp_path / "stereo.wav"
    _write_pcm(p, [16384, 0, -16384, -16384], n_channels=2)
    np.testing.assert_allclose(load_wav(p).samples, [0.25, -0.5])


def test_wav_errors(tmp_path):
    with pytest.raises(InputError):
        load_wav(tmp_path / "missing.wav")
    p = tmp_path / "eight.wav"
    _write_pcm(p, [1, 2, 3], width=1)
    with pytest.raises(UnsupportedFormat):
        load_wav(p)
    p = tmp_path / "empty.wav"
    _write_pcm(p, [])
    with pytest.raises(EmptyFile):
        load_wav(p)
    p = tmp_path / "text.wav"
    p.write_text("not a wav")
    with pytest.raises(UnsupportedFormat):
        load_wav(p)


def test_other_rates_warn(tmp_path, caplog):
    p = tmp_path / "sixteen.wav"
    _write_pcm(p, np.zeros(400, dtype=np.int16), rate=16000)
    clip = load_wav(p)
    assert clip.sample_rate_hz == 16000
    assert "differs" in caplog.text
    # window and hop follow the real rate: 256-sample window, 64-sample hop
    assert stft(clip).frames.shape == (frame_count(400, 256, 64), 129)


def test_write_wav_round_trip(tmp_path):
    clip = AudioClip(np.array([0.5, -1.0, 0.25]), 8000)
    write_wav(clip, tmp_path / "rt.wav")
    np.testing.assert_array_equal(load_wav(tmp_path / "rt.wav").samples, clip.samples)


def test_clip_invariants():
    with pytest.raises(ValidationError):
        AudioClip(np.array([]))
    with pytest.raises(ValidationError):
        AudioClip(np.array([1.5]))


# stft ---------------------------------------------------------------------
def test_frame_count_for_a_27_second_clip():
    # 6853 frames need floor((n - 128) / 32) + 1 = 6853, i.e. n in [219392, 219423]
    n = int(round(27.424 * 8000))
    spec = stft(AudioClip(np.zeros(n)))
    assert spec.frames.shape == (6853, 65)
    assert spec.bin_width_hz == 62.5
    assert spec.window_s == 0.016 and spec.hop_s == 0.004
    # a clip of 27.412 s is 96 samples short of that count
    assert stft(AudioClip(np.zeros(int(round(27.412 * 8000))))).frames.shape[0] == 6850


@settings(max_examples=50, deadline=None)
@given(st.integers(128, 5000))
def test_frame_count_property(n):
    spec = stft(AudioClip(np.zeros(n)))
    assert spec.frames.shape[0] == (n - 128) // 32 + 1


def test_zero_clip_and_too_short():
    assert np.all(stft(AudioClip(np.zeros(1000))).frames == 0)
    with pytest.raises(ClipTooShort):
        stft(AudioClip(np.zeros(127)))


def test_sinusoid_peaks_at_expected_bin():
    t = np.arange(8000) / 8000
    spec = stft(AudioClip(0.5 * np.sin(2 * np.pi * 1000 * t)))
    assert np.all(np.argmax(spec.frames, axis=1) == 16)
    # direct DFT oracle on one windowed frame
    seg = 0.5 * np.sin(2 * np.pi * 1000 * t[32 * 5: 32 * 5 + 128]) * np.hamming(128)
    k = np.arange(65)[:, None]
    dft = np.abs(np.exp(-2j * np.pi * k * np.arange(128)[None] / 128) @ seg)
    np.testing.assert_allclose(spec.frames[5], dft, atol=1e-10)


def test_frame_times_are_centers():
    spec = stft(AudioClip(np.zeros(128 + 32 * 3)))
    np.testing.assert_allclose(spec.times, [0.008, 0.012, 0.016, 0.020])


# channel filter -----------------------------------------------------------
def test_filter_gain_examples():
    g = ChannelFilterSpec().gain([0.0, 250.0, 500.0, 2000.0, 3500.0, 4000.0])
    np.testing.assert_allclose(g, [0.08, 0.54, 1.0, 1.0, 1.0, 0.08], atol=1e-12)


def test_filter_applies_per_bin():
    frames = np.ones((3, 65))
    out = apply_channel_filter(Spectrogram(frames, 0.016, 0.004, 62.5))
    assert out.frames[0, 0] == pytest.approx(HAMMING_FLOOR)
    assert out.frames[0, 32] == 1.0  # 2000 Hz
    assert out.frames[0, 8] == pytest.approx(1.0)  # 500 Hz
    assert out.frames.shape == frames.shape


def test_filter_twice_squares_stopband_gain():
    spec = Spectrogram(np.full((2, 65), 2.0), 0.016, 0.004, 62.5)
    once = apply_channel_filter(spec)
    twice = apply_channel_filter(once)
    gain = ChannelFilterSpec().gain(spec.frequencies_hz)
    np.testing.assert_allclose(twice.frames, np.broadcast_to(2.0 * gain**2, (2, 65)))
    passband = (spec.frequencies_hz > 500) & (spec.frequencies_hz < 3500)
    np.testing.assert_array_equal(twice.frames[:, passband], once.frames[:, passband])


def test_filter_band_errors():
    spec = Spectrogram(np.ones((1, 33)), 0.016, 0.004, 62.5)  # only up to 2000 Hz
    with pytest.raises(BandOutOfRange):
        apply_channel_filter(spec)
    with pytest.raises(BandOutOfRange):
        ChannelFilterSpec(low_edge_hz=0, high_edge_hz=800, rolloff_hz=500)


# cepstra ------------------------------------------------------------------
def _spec(frames):
    return Spectrogram(np.atleast_2d(frames), 0.016, 0.004, 62.5)


def test_flat_frame_cepstrum():
    c = cepstra(_spec(np.full(65, 3.0))).points[0]
    assert c[0] == pytest.approx(np.sqrt(65) * np.log(3.0))
    np.testing.assert_allclose(c[1:], 0.0, atol=1e-12)
    assert c.size == 53


def test_zero_frame_hits_floor():
    c = cepstra(_spec(np.zeros(65))).points[0]
    assert c[0] == pytest.approx(np.sqrt(65) * np.log(1e-10))
    np.testing.assert_allclose(c[1:], 0.0, atol=1e-9)


def test_cepstrum_matches_step_by_step_reference():
    b = np.arange(65)
    mag = 1 + 0.1 * np.cos(2 * np.pi * b / 64)
    # independent reference: explicit loops for the moving average and DCT-II
    half = int(round(800 / (2 * 62.5)))
    smooth = np.array([mag[max(0, i - half): i + half + 1].mean() for i in range(65)])
    logm = np.log(smooth)
    n = 65
    ref = np.array([
        np.sqrt((1 if k == 0 else 2) / n) * np.sum(logm * np.cos(np.pi * k * (2 * b + 1) / (2 * n)))
        for k in range(53)
    ])
    np.testing.assert_allclose(cepstra(_spec(mag)).points[0], ref, atol=1e-10)


def test_smoothing_width():
    assert smoothing_half_width(62.5, 800) == 6
    x = np.zeros(65)
    x[30] = 13.0
    out = smooth_spectrum(x, 6)[0]
    assert out[30] == pytest.approx(1.0) and out[24] == pytest.approx(1.0) and out[23] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 65))
def test_truncated_reconstruction_error_bounded(seed, k):
    mag = np.random.default_rng(seed).uniform(0.01, 5.0, size=65)
    spec = _spec(mag)
    full = cepstra(spec, CepstraConfig(n_cepstra=65)).points[0]
    kept = cepstra(spec, CepstraConfig(n_cepstra=k)).points[0]
    logm = np.log(smooth_spectrum(mag, 6)[0])
    recon = idct(np.r_[kept, np.zeros(65 - k)], type=2, norm="ortho")
    err = np.sum((recon - logm) ** 2)
    assert err <= np.sum(full[k:] ** 2) * (1 + 1e-9) + 1e-18


def test_too_many_cepstra():
    with pytest.raises(ConfigMismatch):
        cepstra(_spec(np.ones(65)), CepstraConfig(n_cepstra=66))


def test_pipeline_is_deterministic(speech_wav):
    clip = load_wav(speech_wav)
    a = cepstra(stft(clip)).points
    b = cepstra(stft(load_wav(speech_wav))).points
    assert a.tobytes() == b.tobytes()
