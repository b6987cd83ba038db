"""Waveform to cepstral feature trajectory, plus a simulated channel filter.

The pipeline is ``load_wav -> stft -> [apply_channel_filter] -> cepstra``;
the cepstra are then reduced with :mod:`geoscale.pca`.
"""

from __future__ import annotations

import logging
import wave
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .exceptions import (
    BandOutOfRange,
    ClipTooShort,
    ConfigMismatch,
    EmptyFile,
    InputError,
    UnsupportedFormat,
    ValidationError,
)
from .trajectory import FeatureTrajectory, _frozen

logger = logging.getLogger(__name__)

#: Value of the Hamming window at its endpoints.
HAMMING_FLOOR = 0.08


@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int = 8000

    def __post_init__(self):
        samples = _frozen(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValidationError("audio clip must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)) or np.max(np.abs(samples)) > 1.0:
            raise ValidationError("audio samples must be finite and within [-1, 1]")
        if int(self.sample_rate_hz) <= 0:
            raise ValidationError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Short-time magnitude spectra, one row per frame.

    ``times`` holds the frame centers in seconds.
    """

    frames: np.ndarray
    window_s: float
    hop_s: float
    bin_width_hz: float
    times: np.ndarray = field(default=None)

    def __post_init__(self):
        frames = _frozen(self.frames)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValidationError("spectrogram needs at least one frame")
        if not np.all(np.isfinite(frames)) or np.any(frames < 0):
            raise ValidationError("spectrogram magnitudes must be finite and non-negative")
        times = self.times
        if times is None:
            times = self.window_s / 2 + self.hop_s * np.arange(frames.shape[0])
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "times", _frozen(times))

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.bin_width_hz * np.arange(self.frames.shape[1])


@dataclass(frozen=True)
class CepstraConfig:
    window_ms: float = 16.0
    hop_ms: float = 4.0
    smoothing_width_hz: float = 800.0
    n_cepstra: int = 53
    log_floor: float = 1e-10

    def __post_init__(self):
        for name in ("window_ms", "hop_ms", "smoothing_width_hz", "n_cepstra", "log_floor"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive", value=getattr(self, name))


@dataclass(frozen=True)
class ChannelFilterSpec:
    """Band-edge attenuation with Hamming half-window ramps.

    Frequencies in ``[low_edge_hz, low_edge_hz + rolloff_hz]`` rise from
    0.08 to 1 and ``[high_edge_hz - rolloff_hz, high_edge_hz]`` fall back;
    frequencies outside ``[low_edge_hz, high_edge_hz]`` keep the floor gain.
    """

    low_edge_hz: float = 0.0
    high_edge_hz: float = 4000.0
    rolloff_hz: float = 500.0

    def __post_init__(self):
        if self.rolloff_hz <= 0 or self.low_edge_hz < 0:
            raise BandOutOfRange("rolloff must be positive and edges non-negative")
        if self.high_edge_hz - self.low_edge_hz < 2 * self.rolloff_hz:
            raise BandOutOfRange("ramps overlap: band narrower than two roll-offs")

    def gain(self, freqs_hz) -> np.ndarray:
        f = np.asarray(freqs_hz, dtype=float)
        g = np.ones_like(f)
        lo_ramp = (f >= self.low_edge_hz) & (f <= self.low_edge_hz + self.rolloff_hz)
        hi_ramp = (f >= self.high_edge_hz - self.rolloff_hz) & (f <= self.high_edge_hz)
        g[lo_ramp] = 0.54 - 0.46 * np.cos(np.pi * (f[lo_ramp] - self.low_edge_hz) / self.rolloff_hz)
        g[hi_ramp] = 0.54 - 0.46 * np.cos(np.pi * (self.high_edge_hz - f[hi_ramp]) / self.rolloff_hz)
        g[(f < self.low_edge_hz) | (f > self.high_edge_hz)] = HAMMING_FLOOR
        return g


def load_wav(path) -> AudioClip:
    """Read a 16-bit PCM RIFF/WAVE file; stereo is averaged to mono."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}", path=str(path))
    try:
        with wave.open(str(path), "rb") as w:
            width = w.getsampwidth()
            n_channels = w.getnchannels()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise UnsupportedFormat(f"not a PCM WAV file: {exc}", path=str(path)) from exc
    if width != 2:
        raise UnsupportedFormat("only 16-bit PCM is supported", sample_width_bytes=width)
    data = np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0
    if data.size == 0:
        raise EmptyFile("WAV file holds no samples", path=str(path))
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    if rate != 8000:
        logger.warning("sample rate %d Hz differs from the expected 8000 Hz", rate)
    return AudioClip(data, rate)


def write_wav(clip: AudioClip, path) -> None:
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(clip.sample_rate_hz)
        w.writeframes(pcm.tobytes())


def _frame_geometry(sample_rate_hz: int, cfg: CepstraConfig) -> tuple[int, int]:
    window = int(round(cfg.window_ms * 1e-3 * sample_rate_hz))
    hop = int(round(cfg.hop_ms * 1e-3 * sample_rate_hz))
    return window, max(hop, 1)


def frame_count(n_samples: int, window: int, hop: int) -> int:
    return (n_samples - window) // hop + 1


def stft(clip: AudioClip, cfg: CepstraConfig = CepstraConfig()) -> Spectrogram:
    """Magnitude spectra of Hamming-windowed frames."""
    window, hop = _frame_geometry(clip.sample_rate_hz, cfg)
    n = clip.samples.size
    if n < window:
        raise ClipTooShort("clip shorter than one analysis window", samples=n, window=window)
    count = frame_count(n, window, hop)
    idx = hop * np.arange(count)[:, None] + np.arange(window)[None, :]
    frames = clip.samples[idx] * np.hamming(window)
    mags = np.abs(np.fft.rfft(frames, axis=1))
    rate = clip.sample_rate_hz
    return Spectrogram(
        frames=mags,
        window_s=window / rate,
        hop_s=hop / rate,
        bin_width_hz=rate / window,
        times=(hop * np.arange(count) + window / 2) / rate,
    )


def apply_channel_filter(spec: Spectrogram, filt: ChannelFilterSpec = ChannelFilterSpec()) -> Spectrogram:
    """Multiply every frame by the filter's frequency response."""
    freqs = spec.frequencies_hz
    if filt.high_edge_hz > freqs[-1] + 1e-9:
        raise BandOutOfRange(
            "filter band extends past the spectrogram's Nyquist frequency",
            high_edge_hz=filt.high_edge_hz, nyquist_hz=float(freqs[-1]),
        )
    return replace(spec, frames=spec.frames * filt.gain(freqs)[None, :])


def smoothing_half_width(bin_width_hz: float, width_hz: float) -> int:
    """Half-width in bins of the centered moving average (800 Hz -> 6 at 62.5 Hz)."""
    return int(round(width_hz / (2.0 * bin_width_hz)))


def smooth_spectrum(frames: np.ndarray, half_width: int) -> np.ndarray:
    """Centered moving average along the last axis, truncated at the edges."""
    frames = np.atleast_2d(frames)
    n_bins = frames.shape[-1]
    csum = np.concatenate([np.zeros(frames.shape[:-1] + (1,)), np.cumsum(frames, axis=-1)], axis=-1)
    lo = np.clip(np.arange(n_bins) - half_width, 0, n_bins)
    hi = np.clip(np.arange(n_bins) + half_width + 1, 0, n_bins)
    return (csum[..., hi] - csum[..., lo]) / (hi - lo)


def cepstra(spec: Spectrogram, cfg: CepstraConfig = CepstraConfig()) -> FeatureTrajectory:
    """Orthonormal DCT-II of the log of the smoothed magnitude spectrum."""
    n_bins = spec.frames.shape[1]
    if cfg.n_cepstra > n_bins:
        raise ConfigMismatch(
            "more cepstra requested than spectral bins", n_cepstra=cfg.n_cepstra, bins=n_bins
        )
    smoothed = smooth_spectrum(spec.frames, smoothing_half_width(spec.bin_width_hz, cfg.smoothing_width_hz))
    logmag = np.log(np.maximum(smoothed, cfg.log_floor))
    coeffs = dct(logmag, type=2, norm="ortho", axis=1)[:, : cfg.n_cepstra]
    return FeatureTrajectory(spec.times, coeffs)
