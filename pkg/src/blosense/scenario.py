"""Scenario description and its ``section.key = value`` text form.

Scenario files are INI documents. Every key is optional; unknown sections
or keys are rejected so that typos never pass silently. The source can be
given as measured dB levels (``squeezing_db``/``antisqueezing_db``) or
directly as ``r``/``extra_noise``; when both are present they must agree.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .model import BloConfig, SqueezeParams, fit_params
from .spectral import SpectrumConfig
from .timesim import EfficiencySpec, SignalSpec

DEFAULT_SQUEEZING_DB = 3.9
DEFAULT_ANTISQUEEZING_DB = 5.24
DEFAULT_SEED = 20170417
DEFAULT_SIGNAL_AMPLITUDE = 1.0
CONSISTENCY_TOL = 1e-6


class ScenarioError(ValueError):
    """Bad scenario input. ``kind`` is ``"parse"`` or ``"validation"``."""

    def __init__(self, message: str, kind: str = "validation"):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class SweepSettings:
    point_duration: float = 0.05
    theta_points: int = 36
    g2_grid: tuple = tuple(round(0.1 * k, 10) for k in range(11))

    def __post_init__(self):
        if not self.point_duration > 0:
            raise ValueError(f"sweep point_duration must be > 0, got {self.point_duration}")
        if self.theta_points < 2:
            raise ValueError(f"sweep theta_points must be >= 2, got {self.theta_points}")
        if any(v < 0 for v in self.g2_grid):
            raise ValueError("sweep g2_grid values must be >= 0")


@dataclass(frozen=True)
class Scenario:
    params: SqueezeParams = field(default_factory=lambda: fit_params(DEFAULT_SQUEEZING_DB, DEFAULT_ANTISQUEEZING_DB))
    signal: SignalSpec = field(default_factory=lambda: SignalSpec(amplitude=DEFAULT_SIGNAL_AMPLITUDE))
    blo: BloConfig = field(default_factory=BloConfig)
    efficiency: EfficiencySpec | None = None
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    duration: float = 0.5
    sample_rate: float = 20e6
    seed: int = DEFAULT_SEED
    label: str = "scenario"
    sweep: SweepSettings = field(default_factory=SweepSettings)

    def __post_init__(self):
        if not self.duration > 0 or not self.sample_rate > 0:
            raise ValueError("duration and sample_rate must be > 0")
        if not self.signal.frequency < self.sample_rate / 2:
            raise ValueError(
                f"signal frequency {self.signal.frequency} Hz must be below Nyquist {self.sample_rate / 2} Hz"
            )
        self.spectrum.check_span(self.sample_rate)
        self.spectrum.segment_length(self.sample_rate)
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


_KEYS = {
    "source": ("squeezing_db", "antisqueezing_db", "r", "extra_noise", "pump_phase",
               "sideband_separation", "opo_bandwidth", "carrier_frequency"),
    "signal": ("frequency", "amplitude", "phase"),
    "blo": ("gain", "phase"),
    "detection": ("efficiency",),
    "spectrum": ("rbw", "vbw", "f_lo", "f_hi", "sweep_time", "window", "overlap"),
    "run": ("duration", "sample_rate", "seed", "label"),
    "sweep": ("point_duration", "theta_points", "g2_grid"),
}
_STRINGS = {("spectrum", "window"), ("run", "label")}
_INTS = {("run", "seed"), ("sweep", "theta_points")}


def _convert(section: str, key: str, raw: str):
    raw = raw.strip()
    try:
        if (section, key) in _STRINGS:
            return raw
        if (section, key) in _INTS:
            return int(raw, 0)
        if (section, key) == ("sweep", "g2_grid"):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        value = float(raw)
    except ValueError:
        raise ScenarioError(f"{section}.{key}: cannot parse value {raw!r}", "parse") from None
    if not math.isfinite(value):
        raise ScenarioError(f"{section}.{key}: value must be finite, got {raw!r}", "parse")
    return value


def _typed(mapping: dict) -> dict:
    out = {}
    for section, entries in mapping.items():
        if section not in _KEYS:
            raise ScenarioError(f"unknown section [{section}]", "parse")
        for key, raw in entries.items():
            if key not in _KEYS[section]:
                raise ScenarioError(f"unknown key {section}.{key}", "parse")
            out[(section, key)] = _convert(section, key, raw) if isinstance(raw, str) else raw
    return out


def _source(v: dict) -> SqueezeParams:
    meta = {k: v[("source", k)] for k in ("pump_phase", "sideband_separation", "opo_bandwidth", "carrier_frequency")
            if ("source", k) in v}
    has_db = [("source", k) in v for k in ("squeezing_db", "antisqueezing_db")]
    has_r = ("source", "r") in v or ("source", "extra_noise") in v
    if any(has_db) and not all(has_db):
        raise ScenarioError("source.squeezing_db and source.antisqueezing_db must be given together")
    if all(has_db):
        fitted = fit_params(v[("source", "squeezing_db")], v[("source", "antisqueezing_db")], **meta)
        if has_r:
            for key, got in (("r", fitted.r), ("extra_noise", fitted.extra_noise)):
                want = v.get(("source", key))
                if want is not None and abs(want - got) > CONSISTENCY_TOL * max(1.0, abs(got)):
                    raise ScenarioError(
                        f"source.{key}={want} is inconsistent with the dB levels (implies {got})"
                    )
        return fitted
    if has_r:
        return SqueezeParams(r=v.get(("source", "r"), 0.0), extra_noise=v.get(("source", "extra_noise"), 0.0), **meta)
    return fit_params(DEFAULT_SQUEEZING_DB, DEFAULT_ANTISQUEEZING_DB, **meta)


def _pick(v: dict, section: str, names: dict) -> dict:
    return {attr: v[(section, key)] for key, attr in names.items() if (section, key) in v}


def scenario_from_mapping(mapping: dict) -> Scenario:
    """Build a Scenario from ``{section: {key: value}}``; values may be strings."""
    v = _typed(mapping)
    try:
        params = _source(v)
        signal = SignalSpec(**{"amplitude": DEFAULT_SIGNAL_AMPLITUDE,
                               **_pick(v, "signal", {k: k for k in _KEYS["signal"]})})
        blo = BloConfig(**_pick(v, "blo", {"gain": "gain", "phase": "phase"}))
        eff = EfficiencySpec(v[("detection", "efficiency")]) if ("detection", "efficiency") in v else None
        spectrum = SpectrumConfig(**_pick(v, "spectrum", {k: k for k in _KEYS["spectrum"]}))
        sweep = SweepSettings(**_pick(v, "sweep", {k: k for k in _KEYS["sweep"]}))
        run = _pick(v, "run", {k: k for k in _KEYS["run"]})
        return Scenario(params=params, signal=signal, blo=blo, efficiency=eff,
                        spectrum=spectrum, sweep=sweep, **run)
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(float(x)) for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def scenario_to_mapping(s: Scenario) -> dict:
    """Exact text echo of the effective scenario; parses back bit-identically."""
    p = s.params
    m = {
        "source": {"r": p.r, "extra_noise": p.extra_noise, "pump_phase": p.pump_phase,
                   "sideband_separation": p.sideband_separation, "opo_bandwidth": p.opo_bandwidth,
                   "carrier_frequency": p.carrier_frequency},
        "signal": {"frequency": s.signal.frequency, "amplitude": s.signal.amplitude, "phase": s.signal.phase},
        "blo": {"gain": s.blo.gain, "phase": s.blo.phase},
        "spectrum": {k: getattr(s.spectrum, k) for k in _KEYS["spectrum"]},
        "run": {"duration": s.duration, "sample_rate": s.sample_rate, "seed": s.seed, "label": s.label},
        "sweep": {k: getattr(s.sweep, k) for k in _KEYS["sweep"]},
    }
    if s.efficiency is not None:
        m["detection"] = {"efficiency": s.efficiency.eta}
    return {sec: {k: _fmt(val) for k, val in entries.items()} for sec, entries in m.items()}


def flatten(mapping: dict, prefix: str = "") -> dict:
    return {f"{prefix}{sec}.{k}": val for sec, entries in mapping.items() for k, val in entries.items()}


def unflatten(flat: dict, prefix: str = "") -> dict:
    out: dict = {}
    for key, val in flat.items():
        if not key.startswith(prefix):
            continue
        sec, _, k = key[len(prefix):].partition(".")
        out.setdefault(sec, {})[k] = val
    return out


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file; missing keys take the defaults."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario file: {exc.strerror}", "parse") from exc
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ScenarioError(f"{path}: {' '.join(str(exc).split())}", "parse") from exc
    mapping = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    try:
        return scenario_from_mapping(mapping)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}", exc.kind) from exc
