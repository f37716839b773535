"""Tapped-delay-line vehicular channels: ITU vehicular models and the
IEEE 802.11p Tiger-Team V2V models.

Rayleigh taps are sums of 32 sinusoids with complex Gaussian weights and
stratified random arrival angles (Clarke model), so every sample is exactly complex
Gaussian and the autocorrelation equals J0(2 pi f_d tau) in expectation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .dsp import ComplexWaveform, ConfigurationError

FADING_TYPES = ("rayleigh_jakes", "rayleigh_shifted", "static")
NUM_SINUSOIDS = 32
DEFAULT_MAX_DOPPLER_HZ = 500.0
# one-sided spread of the Tiger-Team Doppler-shifted taps (50 Hz total width)
DEFAULT_SHIFTED_SPREAD_HZ = 25.0
SINC_TAPS = 17


@dataclass(frozen=True)
class TapSpec:
    delay_ns: float
    gain_db: float
    doppler_shift_hz: float = 0.0
    fading: str = "rayleigh_jakes"

    def __post_init__(self):
        if self.delay_ns < 0:
            raise ValueError("tap delay must be non-negative")
        if self.fading not in FADING_TYPES:
            raise ValueError(f"fading must be one of {FADING_TYPES}")

    @property
    def power(self) -> float:
        return 10.0 ** (self.gain_db / 10.0)


@dataclass(frozen=True)
class ChannelModel:
    name: str
    taps: tuple
    max_doppler_hz: float = DEFAULT_MAX_DOPPLER_HZ
    shifted_spread_hz: float = DEFAULT_SHIFTED_SPREAD_HZ

    def __post_init__(self):
        if not self.taps:
            raise ValueError("a channel model needs at least one tap")
        delays = [t.delay_ns for t in self.taps]
        if delays[0] != 0 or any(b < a for a, b in zip(delays, delays[1:])):
            raise ValueError("tap delays must start at 0 and be non-decreasing")
        if not self.max_doppler_hz > 0:
            raise ValueError("max_doppler_hz must be positive")

    @property
    def delays_ns(self) -> list:
        return [t.delay_ns for t in self.taps]

    @property
    def gains_db(self) -> list:
        return [t.gain_db for t in self.taps]

    @property
    def dopplers_hz(self) -> list:
        return [t.doppler_shift_hz for t in self.taps]

    @property
    def total_power(self) -> float:
        return float(sum(t.power for t in self.taps))

    def with_doppler(self, max_doppler_hz: float) -> "ChannelModel":
        return ChannelModel(self.name, self.taps, max_doppler_hz, self.shifted_spread_hz)


def _itu(name, delays, gains):
    return ChannelModel(name, tuple(TapSpec(d, g) for d, g in zip(delays, gains)))


def _tiger(name, delays, gains, dopplers):
    taps = [TapSpec(delays[0], gains[0], dopplers[0], "static")]
    taps += [TapSpec(d, g, f, "rayleigh_shifted") for d, g, f in zip(delays[1:], gains[1:], dopplers[1:])]
    return ChannelModel(name, tuple(taps))


PRESETS = {
    "itu_va": _itu("itu_va", [0, 310, 710, 1090, 1730, 2510], [0, -1, -9, -10, -15, -20]),
    "itu_vb": _itu("itu_vb", [0, 300, 8900, 12900, 17100, 20000], [-2.5, 0, -12.8, -10, -25.2, -16]),
    "itu_eva": _itu("itu_eva", [0, 30, 150, 310, 370, 710, 1090, 1730, 2510],
                    [0, -1.5, -1.4, -3.6, -0.6, -9.1, -7, -12, -16.9]),
    "rural_los": _tiger("rural_los", [0, 83, 183], [0, -14, -17], [0, 492, -295]),
    "urban_approaching_los": _tiger("urban_approaching_los", [0, 117, 183, 333], [0, -8, -10, -15],
                                    [0, 236, -157, 492]),
    "urban_nlos": _tiger("urban_nlos", [0, 267, 400, 533], [0, -3, -5, -10], [0, 295, -98, 591]),
    "highway_los": _tiger("highway_los", [0, 100, 167, 500], [0, -10, -15, -20], [0, 689, -492, 886]),
    "highway_nlos": _tiger("highway_nlos", [0, 200, 433, 700], [0, -2, -5, -7], [0, 689, -492, 886]),
    "awgn_only": ChannelModel("awgn_only", (TapSpec(0, 0, 0, "static"),)),
}


def preset(name: str, max_doppler_hz: Optional[float] = None) -> ChannelModel:
    try:
        model = PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown channel preset {name!r}; options: {', '.join(PRESETS)}") from None
    return model if max_doppler_hz is None else model.with_doppler(max_doppler_hz)


PRESET_FIELDS = ("model", "tap", "delay_ns", "gain_db", "doppler_hz", "fading_type")


def preset_records() -> list:
    """One record per tap of every preset."""
    rows = []
    for name, model in PRESETS.items():
        for i, t in enumerate(model.taps):
            rows.append({"model": name, "tap": i, "delay_ns": t.delay_ns, "gain_db": t.gain_db,
                         "doppler_hz": t.doppler_shift_hz, "fading_type": t.fading})
    return rows


def presets_csv() -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=PRESET_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in preset_records():
        writer.writerow({k: (repr(float(v)) if isinstance(v, (int, float)) and k != "tap" else v)
                         for k, v in row.items()})
    return buf.getvalue()


def parse_presets_csv(text: str) -> dict:
    """Rebuild tap tables {model: [TapSpec, ...]} from :func:`presets_csv` output."""
    out: dict = {}
    for row in csv.DictReader(io.StringIO(text)):
        out.setdefault(row["model"], []).append(
            TapSpec(float(row["delay_ns"]), float(row["gain_db"]), float(row["doppler_hz"]),
                    row["fading_type"]))
    return out


# --------------------------------------------------------------------------
# Fading processes
# --------------------------------------------------------------------------

@njit(cache=True)
def _sum_of_sinusoids(weights, freqs, sample_rate, n, stride):
    """sum_i weights[i] * exp(j 2 pi freqs[i] t) on n samples.

    Evaluated by phasor recursion every ``stride`` samples and linearly
    interpolated in between.
    """
    m = (n - 1) // stride + 2
    coarse = np.zeros(m, dtype=np.complex128)
    for i in range(weights.size):
        w = np.exp(2j * np.pi * freqs[i] * stride / sample_rate)
        z = weights[i]
        for t in range(m):
            coarse[t] += z
            z *= w
    if stride == 1:
        return coarse[:n]
    out = np.empty(n, dtype=np.complex128)
    for t in range(n):
        j = t // stride
        f = (t - j * stride) / stride
        out[t] = coarse[j] * (1.0 - f) + coarse[j + 1] * f
    return out


# largest phase step between exactly evaluated samples (interpolation error ~ step^2 / 8)
_MAX_PHASE_STEP = 0.01


def _stride(freqs: np.ndarray, sample_rate: float) -> int:
    f = float(np.max(np.abs(freqs))) if freqs.size else 0.0
    if f == 0.0:
        return 64
    return int(max(1, min(64, _MAX_PHASE_STEP * sample_rate / (2 * np.pi * f))))


@dataclass
class FadingRealization:
    gains: np.ndarray  # (n_taps, n_samples) complex
    sample_rate_hz: float
    seed_info: Optional[str] = None

    @property
    def num_samples(self) -> int:
        return self.gains.shape[1]


def tap_process(tap: TapSpec, model: ChannelModel, n: int, sample_rate: float,
                rng: np.random.Generator) -> np.ndarray:
    """Complex gain series of one tap with mean power 10^(gain_db/10)."""
    amp = np.sqrt(tap.power)
    if tap.fading == "static":
        return np.full(n, amp, dtype=np.complex128)
    if tap.fading == "rayleigh_jakes":
        centre, spread = 0.0, model.max_doppler_hz
    else:
        centre, spread = tap.doppler_shift_hz, model.shifted_spread_hz
    # one jittered arrival angle per 2 pi / N sector
    theta = 2 * np.pi * (np.arange(NUM_SINUSOIDS) + rng.uniform(0.0, 1.0, NUM_SINUSOIDS)) / NUM_SINUSOIDS
    weights = (rng.standard_normal(NUM_SINUSOIDS) + 1j * rng.standard_normal(NUM_SINUSOIDS))
    weights *= amp / np.sqrt(2 * NUM_SINUSOIDS)
    freqs = centre + spread * np.cos(theta)
    return _sum_of_sinusoids(weights, freqs, float(sample_rate), int(n), _stride(freqs, sample_rate))


def realize(model: ChannelModel, duration_samples: int, sample_rate: float,
            rng: np.random.Generator) -> FadingRealization:
    """Independent per-tap gain processes over ``duration_samples`` samples."""
    if duration_samples <= 0:
        raise ValueError("duration must be positive")
    gains = np.stack([tap_process(t, model, duration_samples, sample_rate, rng) for t in model.taps])
    return FadingRealization(gains, float(sample_rate))


def delay_samples(model: ChannelModel, sample_rate: float) -> np.ndarray:
    return np.asarray(model.delays_ns) * 1e-9 * sample_rate


def output_extension(model: ChannelModel, sample_rate: float, fractional: bool = False) -> int:
    """Samples added to the waveform length by :func:`apply`."""
    d = delay_samples(model, sample_rate)
    if fractional:
        return int(np.ceil(d.max())) + SINC_TAPS // 2
    return int(np.rint(d).max())


def apply(w: ComplexWaveform, realization: FadingRealization, model: ChannelModel,
          fractional: bool = False, normalize: bool = False) -> ComplexWaveform:
    """y[n] = sum_k g_k[n] x[n - d_k].

    Delays are rounded to the sample grid unless ``fractional`` is set, in
    which case each tap uses a 17-tap truncated-sinc interpolator.
    ``normalize`` divides by the square root of the total tap power.
    """
    if realization.sample_rate_hz != w.sample_rate_hz:
        raise ValueError("realization and waveform sample rates differ")
    x = w.samples
    n_out = x.size + output_extension(model, w.sample_rate_hz, fractional)
    if realization.num_samples < n_out:
        raise ValueError("realization is shorter than the channel output")
    if realization.gains.shape[0] != len(model.taps):
        raise ValueError("realization does not match the model's tap count")
    y = np.zeros(n_out, dtype=np.complex128)
    for k, d in enumerate(delay_samples(model, w.sample_rate_hz)):
        g = realization.gains[k, :n_out]
        if not fractional:
            s = int(np.rint(d))
            y[s:s + x.size] += g[s:s + x.size] * x
            continue
        centre = int(np.floor(d))
        m = np.arange(centre - SINC_TAPS // 2, centre + SINC_TAPS // 2 + 1)
        h = np.sinc(m - d)
        shifted = np.zeros(n_out, dtype=np.complex128)
        for mi, hi in zip(m, h):
            lo, hi_ = max(mi, 0), min(mi + x.size, n_out)
            if hi_ > lo:
                shifted[lo:hi_] += hi * x[lo - mi:hi_ - mi]
        y += g * shifted
    if normalize:
        y /= np.sqrt(model.total_power)
    return ComplexWaveform(y, w.sample_rate_hz)
