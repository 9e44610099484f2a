"""Monte Carlo synthesis of sideband quadratures and BLO photocurrents.

Each sideband is simulated as a baseband (X, Y) pair in the rotating frame
of its own carrier; the optical carriers are never sampled. Vacuum
quadratures are white Gaussian with unit variance per sample, so the
per-sample variance of a photocurrent is directly in SQL units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from .model import BloConfig, SqueezeParams
from .rng import derive_rng

if TYPE_CHECKING:
    from .scenario import Scenario

CHANNELS = ("x_minus", "y_minus", "x_plus", "y_plus")


class TrialError(RuntimeError):
    """A pipeline stage failed; ``stage`` names which one."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class SignalSpec:
    """Deterministic tone carried by the lower-sideband phase quadrature."""

    frequency: float = 500e3
    amplitude: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"signal frequency must be > 0, got {self.frequency}")
        if not self.amplitude >= 0:
            raise ValueError(f"signal amplitude must be >= 0, got {self.amplitude}")


@dataclass(frozen=True)
class EfficiencySpec:
    eta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"efficiency eta must lie in (0, 1], got {self.eta}")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class QuadratureSeries:
    """Sampled (X-, Y-, X+, Y+) quadratures, stored as a read-only 4 x n array."""

    sample_rate: float
    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] != 4:
            raise ValueError(f"expected 4 equal-length channels, got shape {self.data.shape}")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        if self.data.flags.writeable:
            _freeze(self.data)

    @classmethod
    def from_channels(cls, sample_rate, x_minus, y_minus, x_plus, y_plus):
        chans = [np.asarray(c, dtype=float) for c in (x_minus, y_minus, x_plus, y_plus)]
        if len({c.shape for c in chans}) != 1 or chans[0].ndim != 1:
            raise ValueError("channel-length mismatch: all four channels must be 1-D and equal length")
        return cls(sample_rate, np.stack(chans))

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def x_minus(self):
        return self.data[0]

    @property
    def y_minus(self):
        return self.data[1]

    @property
    def x_plus(self):
        return self.data[2]

    @property
    def y_plus(self):
        return self.data[3]


@dataclass(frozen=True)
class PhotocurrentSeries:
    sample_rate: float
    samples: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.samples.ndim != 1:
            raise ValueError("photocurrent samples must be 1-D")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("photocurrent contains non-finite samples")
        if self.samples.flags.writeable:
            _freeze(self.samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


class VarianceEstimate(NamedTuple):
    value: float
    stderr: float
    n_samples: int

    def ratio(self, reference: "VarianceEstimate") -> "VarianceEstimate":
        """``self / reference`` with independent relative errors combined."""
        value = self.value / reference.value
        rel = math.hypot(self.stderr / self.value, reference.stderr / reference.value)
        return VarianceEstimate(value, value * rel, self.n_samples)


def estimate_variance(samples: np.ndarray, n_blocks: int = 100) -> VarianceEstimate:
    """Mean-square of a zero-mean series with a block-spread standard error."""
    x = np.asarray(samples, dtype=float)
    n_blocks = min(n_blocks, x.size // 2)
    if n_blocks < 2:
        raise ValueError("need at least 4 samples to estimate a variance")
    usable = (x.size // n_blocks) * n_blocks
    block_power = np.mean(np.square(x[:usable]).reshape(n_blocks, -1), axis=1)
    value = float(np.mean(block_power))
    stderr = float(np.std(block_power, ddof=1) / math.sqrt(n_blocks))
    return VarianceEstimate(value, stderr, usable)


def _cos_sin(theta: float) -> tuple[float, float]:
    # exact values on multiples of pi/2 so that e.g. theta = pi/2 selects Y alone
    k = theta / (math.pi / 2)
    kr = round(k)
    if abs(k - kr) < 1e-12:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[kr % 4]
    return math.cos(theta), math.sin(theta)


def synthesize_vacuum_quadratures(duration: float, sample_rate: float, seed: int) -> QuadratureSeries:
    """Four independent unit-variance white Gaussian vacuum quadratures."""
    if not duration > 0 or not sample_rate > 0:
        raise ValueError(f"duration and sample_rate must be > 0, got {duration}, {sample_rate}")
    n = int(round(duration * sample_rate))
    if n < 2:
        raise ValueError(f"duration * sample_rate must give >= 2 samples, got {n}")
    rng = derive_rng(seed, "vacuum")
    return QuadratureSeries(sample_rate, rng.standard_normal((4, n)))


def apply_opo(series: QuadratureSeries, params: SqueezeParams, seed: int) -> QuadratureSeries:
    """Two-mode squeezing of the sideband pair, with excess antisqueezed noise.

    The excess noise terms N_X, N_Y (variance Ne each) enter with half
    weight: N_X identically on both X channels, N_Y with opposite signs on
    the Y channels, so X- - X+ and Y- + Y+ stay free of excess noise.
    """
    if params.pump_phase != 0.0:
        raise ValueError("apply_opo requires pump_phase = 0")
    if params.r == 0.0 and params.extra_noise == 0.0:
        return series
    ch, sh = math.cosh(params.r), math.sinh(params.r)
    xm, ym, xp, yp = series.data
    out = np.empty_like(series.data)
    np.multiply(xm, ch, out=out[0])
    out[0] += sh * xp
    np.multiply(ym, ch, out=out[1])
    out[1] -= sh * yp
    np.multiply(xp, ch, out=out[2])
    out[2] += sh * xm
    np.multiply(yp, ch, out=out[3])
    out[3] -= sh * ym
    if params.extra_noise > 0.0:
        rng = derive_rng(seed, "opo-excess")
        half = 0.5 * math.sqrt(params.extra_noise)
        noise = rng.standard_normal((2, series.n_samples))
        noise *= half
        out[0] += noise[0]
        out[2] += noise[0]
        out[1] += noise[1]
        out[3] -= noise[1]
    return QuadratureSeries(series.sample_rate, out)


def tone(signal: SignalSpec, n_samples: int, sample_rate: float) -> np.ndarray:
    t = np.arange(n_samples) / sample_rate
    return signal.amplitude * np.cos(2.0 * math.pi * signal.frequency * t + signal.phase)


def inject_signal(series: QuadratureSeries, signal: SignalSpec) -> QuadratureSeries:
    """Add the tone to the Y- channel; the other channels pass through."""
    if not signal.frequency < series.sample_rate / 2:
        raise ValueError(
            f"signal frequency {signal.frequency} Hz is not below Nyquist "
            f"({series.sample_rate / 2} Hz)"
        )
    if signal.amplitude == 0.0:
        return series
    out = series.data.copy()
    out[1] += tone(signal, series.n_samples, series.sample_rate)
    return QuadratureSeries(series.sample_rate, out)


def blo_photocurrent(series: QuadratureSeries, blo: BloConfig, provenance: dict | None = None) -> PhotocurrentSeries:
    """Balanced-detector difference current for the bichromatic LO."""
    c, s = _cos_sin(blo.phase)
    xm, ym, xp, yp = series.data
    i = _quadrature(xm, ym, c, s)
    if blo.gain != 0.0:
        i += blo.gain * _quadrature(xp, yp, c, s)
    prov = {"gain_g": blo.gain, "phase_theta": blo.phase}
    prov.update(provenance or {})
    return PhotocurrentSeries(series.sample_rate, i, prov)


def _quadrature(x, y, c, s):
    if s == 0.0:
        return x * c
    if c == 0.0:
        return y * s
    q = x * c
    q += y * s
    return q


def apply_detection_efficiency(series, eff: EfficiencySpec, seed: int):
    """Beam-splitter loss: c -> sqrt(eta) c + sqrt(1 - eta) v, v fresh vacuum."""
    if not isinstance(eff, EfficiencySpec):
        eff = EfficiencySpec(eff)
    if eff.eta == 1.0:
        return series
    rng = derive_rng(seed, "loss")
    a, b = math.sqrt(eff.eta), math.sqrt(1.0 - eff.eta)
    if isinstance(series, QuadratureSeries):
        out = rng.standard_normal(series.data.shape)
        out *= b
        out += a * series.data
        return QuadratureSeries(series.sample_rate, out)
    if isinstance(series, PhotocurrentSeries):
        out = rng.standard_normal(series.n_samples)
        out *= b
        out += a * series.samples
        return PhotocurrentSeries(series.sample_rate, out, dict(series.provenance, efficiency=eff.eta))
    raise TypeError(f"cannot apply efficiency to {type(series).__name__}")


def run_trial(scenario: "Scenario") -> PhotocurrentSeries:
    """synthesize -> OPO -> signal -> loss -> BLO detection, all from one seed."""
    seed = scenario.seed
    stage = "synthesize"
    try:
        q = synthesize_vacuum_quadratures(scenario.duration, scenario.sample_rate, seed)
        stage = "apply_opo"
        q = apply_opo(q, scenario.params, seed)
        stage = "inject_signal"
        q = inject_signal(q, scenario.signal)
        if scenario.efficiency is not None:
            stage = "apply_detection_efficiency"
            q = apply_detection_efficiency(q, scenario.efficiency, seed)
        stage = "blo_photocurrent"
        prov = {"rng_seed": seed, "scenario": scenario.label}
        return blo_photocurrent(q, scenario.blo, prov)
    except TrialError:
        raise
    except (ValueError, TypeError, FloatingPointError) as exc:
        raise TrialError(stage, exc) from exc
