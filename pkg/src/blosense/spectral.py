"""FFT spectrum-analyzer emulation.

The resolution bandwidth sets the segment length (bin spacing = RBW), each
segment is tapered and turned into a one-sided PSD, and the video filter is
a first-order low-pass run across successive segment periodograms. The
displayed trace is the video-filtered stream averaged over the sweep.
Raw traces are one-sided densities (units^2/Hz) so that summing
``power * bin_width`` over the full band returns the sample variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal as sps

RAW = "raw"
SQL_NORMALIZED = "sql-normalized"
PEAK_GUARD_BINS = 2


@dataclass(frozen=True)
class SpectrumConfig:
    rbw: float = 10e3
    vbw: float = 30.0
    f_lo: float = 100e3
    f_hi: float = 1e6
    sweep_time: float = 0.5
    window: str = "hann"
    overlap: float = 0.5

    def __post_init__(self):
        if not self.rbw > 0:
            raise ValueError(f"rbw must be > 0, got {self.rbw}")
        if not 0 < self.vbw <= self.rbw:
            raise ValueError(f"vbw must satisfy 0 < vbw <= rbw, got vbw={self.vbw}, rbw={self.rbw}")
        if not 0 <= self.f_lo < self.f_hi:
            raise ValueError(f"span must satisfy 0 <= f_lo < f_hi, got ({self.f_lo}, {self.f_hi})")
        if not self.sweep_time > 0:
            raise ValueError(f"sweep_time must be > 0, got {self.sweep_time}")
        if not 0 <= self.overlap < 1:
            raise ValueError(f"overlap must lie in [0, 1), got {self.overlap}")
        try:
            sps.get_window(self.window, 16)
        except ValueError as exc:
            raise ValueError(f"unknown window {self.window!r}") from exc

    def segment_length(self, sample_rate: float) -> int:
        nperseg = int(round(sample_rate / self.rbw))
        if nperseg < 16:
            raise ValueError(
                f"rbw {self.rbw} Hz not achievable at {sample_rate} Hz: "
                f"segment length {nperseg} < 16 samples"
            )
        return nperseg

    def hop(self, sample_rate: float) -> int:
        nperseg = self.segment_length(sample_rate)
        return nperseg - int(round(self.overlap * nperseg))

    def check_span(self, sample_rate: float) -> None:
        if self.f_hi > sample_rate / 2:
            raise ValueError(f"span upper edge {self.f_hi} Hz exceeds Nyquist {sample_rate / 2} Hz")


@dataclass(frozen=True)
class NoiseTrace:
    frequencies: np.ndarray
    power: np.ndarray
    normalization: str
    config: SpectrumConfig
    sample_rate: float
    enbw: float
    n_eff: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.normalization not in (RAW, SQL_NORMALIZED):
            raise ValueError(f"unknown normalization tag {self.normalization!r}")
        if self.frequencies.shape != self.power.shape or self.frequencies.ndim != 1:
            raise ValueError("frequencies and power must be equal-length 1-D arrays")
        if self.frequencies.size and np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequency bins must be strictly increasing")
        if not np.all(np.isfinite(self.power)) or np.any(self.power <= 0):
            raise ValueError("trace power must be finite and > 0")

    @property
    def bin_width(self) -> float:
        return self.sample_rate / self.config.segment_length(self.sample_rate)

    @property
    def power_dB(self) -> np.ndarray:
        if self.normalization != SQL_NORMALIZED:
            raise ValueError("dB conversion requires an sql-normalized trace")
        return 10.0 * np.log10(self.power)

    def bin_index(self, frequency: float) -> int:
        if not self.frequencies[0] - self.bin_width / 2 <= frequency <= self.frequencies[-1] + self.bin_width / 2:
            raise ValueError(f"frequency {frequency} Hz outside the trace span")
        return int(np.argmin(np.abs(self.frequencies - frequency)))


@dataclass(frozen=True)
class SegmentStream:
    """Per-segment one-sided PSDs, shape (n_segments, n_bins)."""

    frequencies: np.ndarray
    periodograms: np.ndarray
    sample_rate: float
    hop: int
    enbw: float
    overlap_correlation: float

    @property
    def n_segments(self) -> int:
        return self.periodograms.shape[0]


def _window(config: SpectrumConfig, nperseg: int) -> np.ndarray:
    return sps.get_window(config.window, nperseg)


def overlap_correlation(window: np.ndarray, hop: int) -> float:
    """Correlation of successive white-noise periodogram bins for this window/hop."""
    if hop >= window.size:
        return 0.0
    return float((np.dot(window[:-hop], window[hop:]) / np.dot(window, window)) ** 2)


def segment_periodograms(samples, sample_rate: float, config: SpectrumConfig) -> SegmentStream:
    x = np.asarray(getattr(samples, "samples", samples), dtype=float)
    config.check_span(sample_rate)
    nperseg = config.segment_length(sample_rate)
    hop = config.hop(sample_rate)
    if x.size < nperseg + hop:
        raise ValueError(
            f"series of {x.size} samples is too short for rbw {config.rbw} Hz "
            f"(needs >= 2 segments of {nperseg})"
        )
    win = _window(config, nperseg)
    f, _, sxx = sps.spectrogram(
        x, fs=sample_rate, window=win, nperseg=nperseg, noverlap=nperseg - hop,
        detrend=False, return_onesided=True, scaling="density", mode="psd",
    )
    enbw = sample_rate * float(np.dot(win, win)) / float(np.sum(win)) ** 2
    return SegmentStream(f, np.ascontiguousarray(sxx.T), sample_rate, hop, enbw, overlap_correlation(win, hop))


def _span_mask(frequencies, config: SpectrumConfig):
    return (frequencies >= config.f_lo) & (frequencies <= config.f_hi)


def welch_psd(series, config: SpectrumConfig, sample_rate: float | None = None) -> NoiseTrace:
    """Plain Welch average of all segment periodograms, cropped to the span."""
    fs = sample_rate if sample_rate is not None else series.sample_rate
    stream = segment_periodograms(series, fs, config)
    mask = _span_mask(stream.frequencies, config)
    m = stream.n_segments
    n_eff = m / (1.0 + 2.0 * stream.overlap_correlation * (m - 1) / m)
    return NoiseTrace(
        stream.frequencies[mask], stream.periodograms.mean(axis=0)[mask], RAW,
        config, fs, stream.enbw, n_eff,
        {"estimator": "welch", "segments": m, **getattr(series, "provenance", {})},
    )


def video_weights(n_segments: int, alpha: float) -> np.ndarray:
    """Weights of each segment in the sweep-averaged first-order filter output."""
    k = np.arange(n_segments)
    beta = 1.0 - alpha
    if alpha == 1.0:
        h = np.ones(n_segments)
    else:
        h = 1.0 - beta ** (n_segments - k)
        h[0] = (1.0 - beta**n_segments) / alpha
    return h / n_segments


def video_alpha(config: SpectrumConfig, hop_seconds: float) -> float:
    if config.vbw >= config.rbw:
        return 1.0
    return 1.0 - math.exp(-2.0 * math.pi * config.vbw * hop_seconds)


def vbw_average(stream: SegmentStream, config: SpectrumConfig, provenance: dict | None = None) -> NoiseTrace:
    """Video-filter the segment stream and average it over one sweep.

    The filter time constant is 1/(2 pi vbw); with vbw = rbw the filter is
    a pass-through and the result is the Welch average of the sweep.
    """
    if config.vbw > config.rbw:
        raise ValueError(f"vbw {config.vbw} Hz exceeds rbw {config.rbw} Hz")
    fs = stream.sample_rate
    nperseg = config.segment_length(fs)
    needed = int(round(config.sweep_time * fs - nperseg)) // stream.hop + 1
    if needed < 1 or stream.n_segments < needed:
        raise ValueError(
            f"sweep time {config.sweep_time} s needs {needed} segments, "
            f"only {stream.n_segments} available"
        )
    mask = _span_mask(stream.frequencies, config)
    x = stream.periodograms[:needed, mask]
    alpha = video_alpha(config, stream.hop / fs)
    if alpha < 1.0:
        beta = 1.0 - alpha
        y, _ = sps.lfilter([alpha], [1.0, -beta], x, axis=0, zi=beta * x[:1])
        power = y.mean(axis=0)
    else:
        power = x.mean(axis=0)
    h = video_weights(needed, alpha)
    rho = stream.overlap_correlation
    n_eff = 1.0 / (float(np.dot(h, h)) + 2.0 * rho * float(np.dot(h[:-1], h[1:])))
    prov = {"estimator": "welch+video", "segments": needed, "video_alpha": alpha}
    prov.update(provenance or {})
    return NoiseTrace(stream.frequencies[mask], power, RAW, config, fs, stream.enbw, n_eff, prov)


def analyze(series, config: SpectrumConfig) -> NoiseTrace:
    """Full analyzer chain for a photocurrent series."""
    stream = segment_periodograms(series, series.sample_rate, config)
    prov = dict(getattr(series, "provenance", {}))
    return vbw_average(stream, config, prov)


def _same_grid(a: NoiseTrace, b: NoiseTrace) -> bool:
    return (
        a.config == b.config
        and a.sample_rate == b.sample_rate
        and np.array_equal(a.frequencies, b.frequencies)
    )


def normalize_to_sql(trace: NoiseTrace, sql_trace: NoiseTrace) -> NoiseTrace:
    if not _same_grid(trace, sql_trace):
        raise ValueError("trace and SQL reference differ in frequency grid or analyzer config")
    prov = dict(trace.provenance, sql_reference=sql_trace.provenance.get("scenario", "sql"))
    return replace(trace, power=trace.power / sql_trace.power, normalization=SQL_NORMALIZED, provenance=prov)


def _floor_indices(trace: NoiseTrace, peak: int | None, floor_band) -> np.ndarray:
    lo, hi = floor_band if floor_band is not None else (trace.frequencies[0], trace.frequencies[-1])
    idx = np.nonzero((trace.frequencies >= lo) & (trace.frequencies <= hi))[0]
    if peak is not None:
        idx = idx[np.abs(idx - peak) > PEAK_GUARD_BINS]
    if idx.size == 0:
        raise ValueError(f"floor band {floor_band} contains no usable bins")
    return idx


def floor_level(trace: NoiseTrace, floor_band=None, exclude_frequency: float | None = None) -> float:
    """Median power over the floor band, skipping the bins around a tone."""
    peak = trace.bin_index(exclude_frequency) if exclude_frequency is not None else None
    return float(np.median(trace.power[_floor_indices(trace, peak, floor_band)]))


def peak_snr(trace: NoiseTrace, signal_freq: float, floor_band=None) -> float:
    """10 log10 of the tone bin over the median floor, in dB."""
    peak = trace.bin_index(signal_freq)
    floor = np.median(trace.power[_floor_indices(trace, peak, floor_band)])
    return float(10.0 * np.log10(trace.power[peak] / floor))


def tone_power(trace: NoiseTrace, frequency: float) -> float:
    """Power of a bin-centred tone, in the series' squared units."""
    return float(trace.power[trace.bin_index(frequency)] * trace.enbw)
