"""Closed-form variance model for bichromatic homodyne detection of a
broadband squeezed vacuum.

All variances are in SQL units: a single vacuum sideband quadrature has
variance 1, and the single-LO (g = 0) vacuum photocurrent defines 0 dB.
The squeezed source carries an optional excess noise ``Ne`` on its
antisqueezed combinations; ``Ne = 0`` is the minimum-uncertainty OPO.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "SqueezeParams",
    "BloConfig",
    "VarianceReport",
    "sideband_variance",
    "correlated_variances",
    "conditional_variance_x",
    "conditional_variance_y",
    "conditional_variance",
    "optimal_gain",
    "min_conditional_variance",
    "variance_report",
    "fit_params",
    "variance_to_dB",
    "dB_to_variance",
    "ideal_sideband_variance",
    "ideal_correlated_variances",
    "ideal_conditional_variance_x",
    "ideal_conditional_variance_y",
    "ideal_optimal_gain",
    "ideal_min_conditional_variance",
]


@dataclass(frozen=True)
class SqueezeParams:
    """State of the broadband squeezed field.

    Only ``r`` and ``extra_noise`` enter the analytic results; the
    frequency fields are carried along as run metadata.
    """

    r: float = 0.0
    extra_noise: float = 0.0
    pump_phase: float = 0.0
    sideband_separation: float = 10e6
    opo_bandwidth: float = 70e6
    carrier_frequency: float = 281.76e12

    def __post_init__(self):
        if not math.isfinite(self.r) or self.r < 0:
            raise ValueError(f"squeeze factor r must be >= 0, got {self.r}")
        if not math.isfinite(self.extra_noise) or self.extra_noise < 0:
            raise ValueError(
                f"extra noise Ne must be >= 0, got {self.extra_noise}"
            )
        if self.pump_phase != 0.0:
            raise ValueError(
                "pump_phase must be 0: only the unrotated squeezing ellipse "
                f"is supported, got {self.pump_phase}"
            )

    @property
    def squeezed_factor(self) -> float:
        """e^{-2r}"""
        return math.exp(-2.0 * self.r)

    @property
    def antisqueezed_factor(self) -> float:
        """e^{2r}"""
        return math.exp(2.0 * self.r)

    @classmethod
    def from_squeezed_factor(cls, e_minus_2r: float, extra_noise: float = 0.0, **metadata):
        """Build from the linear squeezing level e^{-2r} in (0, 1]."""
        if not 0.0 < e_minus_2r <= 1.0:
            raise ValueError(f"e^-2r must lie in (0, 1], got {e_minus_2r}")
        return cls(r=-0.5 * math.log(e_minus_2r), extra_noise=extra_noise, **metadata)


@dataclass(frozen=True)
class BloConfig:
    """Bichromatic LO: idler/signal amplitude ratio and relative phase."""

    gain: float = 0.0
    phase: float = math.pi / 2

    def __post_init__(self):
        if not math.isfinite(self.gain) or self.gain < 0:
            raise ValueError(f"BLO gain g must be >= 0, got {self.gain}")
        if not math.isfinite(self.phase):
            raise ValueError(f"BLO phase must be finite, got {self.phase}")

    @property
    def reduced_phase(self) -> float:
        return self.phase % (2.0 * math.pi)


@dataclass(frozen=True)
class VarianceReport:
    single_sideband_variance: float
    correlated_diff_x: float
    correlated_sum_y: float
    correlated_sum_x: float
    correlated_diff_y: float
    conditional_x: float
    conditional_y: float
    conditional_at_theta: float
    g_opt: float
    min_conditional: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _anti(params: SqueezeParams) -> float:
    # antisqueezed level with half the excess noise folded in
    return params.antisqueezed_factor + params.extra_noise / 2.0


def sideband_variance(params: SqueezeParams) -> float:
    """Variance of any single sideband quadrature (X-, Y-, X+, Y+)."""
    return (params.squeezed_factor + params.antisqueezed_factor) / 2.0 + params.extra_noise / 4.0


def correlated_variances(params: SqueezeParams) -> tuple[float, float]:
    """Return ``(squeezed, antisqueezed)`` two-mode combination variances.

    ``squeezed`` is Var(X- - X+) = Var(Y- + Y+); ``antisqueezed`` is
    Var(X- + X+) = Var(Y- - Y+). The two-mode vacuum reference is 2.
    """
    return 2.0 * params.squeezed_factor, 2.0 * params.antisqueezed_factor + params.extra_noise


def conditional_variance_y(params: SqueezeParams, gain: float) -> float:
    """Var(Y- + g Y+), the conditional phase quadrature."""
    return 0.5 * _anti(params) * (1.0 - gain) ** 2 + 0.5 * params.squeezed_factor * (1.0 + gain) ** 2


def conditional_variance_x(params: SqueezeParams, gain: float) -> float:
    """Var(X- + g X+), the conditional amplitude quadrature."""
    return 0.5 * _anti(params) * (1.0 + gain) ** 2 + 0.5 * params.squeezed_factor * (1.0 - gain) ** 2


def conditional_variance(params: SqueezeParams, blo: BloConfig) -> float:
    """BLO photocurrent variance at arbitrary LO phase.

    The X and Y combinations are uncorrelated for an unrotated pump, so
    the quadrature at phase theta interpolates as cos^2/sin^2.
    """
    c2 = math.cos(blo.phase) ** 2
    s2 = 1.0 - c2
    return c2 * conditional_variance_x(params, blo.gain) + s2 * conditional_variance_y(params, blo.gain)


def optimal_gain(params: SqueezeParams) -> float:
    """Idler gain minimising the conditional phase-quadrature variance."""
    a, s = _anti(params), params.squeezed_factor
    return (a - s) / (a + s)


def min_conditional_variance(params: SqueezeParams) -> float:
    a, s = _anti(params), params.squeezed_factor
    return 2.0 * s * a / (a + s)


def variance_report(params: SqueezeParams, blo: BloConfig | None = None) -> VarianceReport:
    blo = blo or BloConfig()
    squeezed, anti = correlated_variances(params)
    return VarianceReport(
        single_sideband_variance=sideband_variance(params),
        correlated_diff_x=squeezed,
        correlated_sum_y=squeezed,
        correlated_sum_x=anti,
        correlated_diff_y=anti,
        conditional_x=conditional_variance_x(params, blo.gain),
        conditional_y=conditional_variance_y(params, blo.gain),
        conditional_at_theta=conditional_variance(params, blo),
        g_opt=optimal_gain(params),
        min_conditional=min_conditional_variance(params),
    )


def fit_params(squeezing_dB: float, antisqueezing_dB: float, **metadata) -> SqueezeParams:
    """Invert measured squeezing/antisqueezing levels into ``(r, Ne)``.

    Both levels are magnitudes in dB of the correlated combinations relative
    to their two-mode vacuum level, so ``squeezing_dB > 0`` means noise
    reduction.
    """
    if not squeezing_dB > 0:
        raise ValueError(f"squeezing_dB must be > 0, got {squeezing_dB}")
    if antisqueezing_dB < squeezing_dB:
        raise ValueError(
            "antisqueezing_dB < squeezing_dB implies extra noise Ne < 0 "
            f"(invariant Ne >= 0 violated): {antisqueezing_dB} < {squeezing_dB}"
        )
    e_minus_2r = 10.0 ** (-squeezing_dB / 10.0)
    # squeezing_dB == antisqueezing_dB must give Ne == 0 exactly
    anti_linear = 10.0 ** (antisqueezing_dB / 10.0)
    extra = max(2.0 * (anti_linear - 1.0 / e_minus_2r), 0.0)
    return SqueezeParams.from_squeezed_factor(e_minus_2r, extra, **metadata)


def variance_to_dB(v: float) -> float:
    if not v > 0:
        raise ValueError(f"variance must be > 0 for dB conversion, got {v}")
    return 10.0 * math.log10(v)


def dB_to_variance(d: float) -> float:
    return 10.0 ** (d / 10.0)


# Minimum-uncertainty (Ne = 0) forms, kept as an independent evaluation path.

def ideal_sideband_variance(r: float) -> float:
    return (math.exp(-2 * r) + math.exp(2 * r)) / 2


def ideal_correlated_variances(r: float) -> tuple[float, float]:
    return 2 * math.exp(-2 * r), 2 * math.exp(2 * r)


def ideal_conditional_variance_y(r: float, g: float) -> float:
    return math.exp(2 * r) / 2 * (1 - g) ** 2 + math.exp(-2 * r) / 2 * (1 + g) ** 2


def ideal_conditional_variance_x(r: float, g: float) -> float:
    return math.exp(-2 * r) / 2 * (1 - g) ** 2 + math.exp(2 * r) / 2 * (1 + g) ** 2


def ideal_optimal_gain(r: float) -> float:
    return math.tanh(2 * r)


def ideal_min_conditional_variance(r: float) -> float:
    return 1 / math.cosh(2 * r)
