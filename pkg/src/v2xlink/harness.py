"""Monte Carlo BLER experiments: trials, SNR sweeps, statistics, curve
comparison and CSV/SVG export."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import channel as ch
from . import cv2x, dot11p
from .dsp import ComplexWaveform, ConfigurationError, add_awgn

TECHNOLOGIES = ("dot11p", "cv2x")
MCS_SCHEMES = ("qpsk_half", "qpsk_threequarter")
DOT11P_MCS = {"qpsk_half": 2, "qpsk_threequarter": 3}
SNR_REFERENCES = ("sample", "occupied")
CSV_HEADER = "technology,mcs,channel,snr_db,trials,errors,bler,ci_low,ci_high"
WILSON_Z = 1.959963984540054
# guard samples around an 802.11p packet: random leading silence and a tail
LEAD_MAX = 160
TAIL_PAD = 80


@dataclass(frozen=True)
class SimConfig:
    technology: str
    mcs_scheme: str
    channel: str
    snr_db_list: tuple = ()
    payload_bytes: int = 300
    max_trials: int = 5000
    target_errors: int = 100
    seed: int = 0
    max_doppler_hz: float = ch.DEFAULT_MAX_DOPPLER_HZ
    snr_reference: str = "sample"
    fractional_delay: bool = False
    normalize_channel_power: bool = False

    def __post_init__(self):
        if self.technology not in TECHNOLOGIES:
            raise ConfigurationError(
                f"unknown technology {self.technology!r}; options: {', '.join(TECHNOLOGIES)}")
        if self.mcs_scheme not in MCS_SCHEMES:
            raise ConfigurationError(
                f"unknown MCS scheme {self.mcs_scheme!r}; options: {', '.join(MCS_SCHEMES)}")
        ch.preset(self.channel)
        if self.snr_reference not in SNR_REFERENCES:
            raise ConfigurationError(
                f"unknown SNR reference {self.snr_reference!r}; options: {', '.join(SNR_REFERENCES)}")
        snrs = tuple(float(s) for s in self.snr_db_list)
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise ConfigurationError("SNR values must be strictly increasing")
        object.__setattr__(self, "snr_db_list", snrs)
        if not 1 <= self.payload_bytes <= 4095:
            raise ConfigurationError("payload_bytes must be in 1..4095")
        if self.target_errors < 1 or self.max_trials < self.target_errors:
            raise ConfigurationError("need 1 <= target_errors <= max_trials")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if not self.max_doppler_hz > 0:
            raise ConfigurationError("max_doppler_hz must be positive")

    def channel_model(self) -> ch.ChannelModel:
        return ch.preset(self.channel, self.max_doppler_hz)

    def metadata(self) -> dict:
        d = asdict(self)
        d["snr_db_list"] = " ".join(repr(s) for s in self.snr_db_list)
        return d


@dataclass(frozen=True)
class TrialOutcome:
    error: bool
    kind: Optional[str] = None  # "sync", "header" or "payload"


@dataclass
class BlerPoint:
    snr_db: float
    trials: int
    errors: int
    bler: float
    ci_low: float
    ci_high: float
    sync_fail: int = 0
    header_fail: int = 0
    payload_fail: int = 0

    @classmethod
    def from_counts(cls, snr_db: float, trials: int, errors: int, **counters) -> "BlerPoint":
        lo, hi = wilson_interval(errors, trials)
        bler = errors / trials if trials else 0.0
        return cls(float(snr_db), trials, errors, bler, lo, hi, **counters)


@dataclass
class BlerCurve:
    technology: str
    mcs: str
    channel: str
    points: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        snrs = [p.snr_db for p in self.points]
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise ValueError("curve SNR values must be strictly increasing")

    @property
    def label(self) -> str:
        return f"{self.technology} {self.mcs} ({self.channel})"


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple:
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi


# --------------------------------------------------------------------------
# Trials
# --------------------------------------------------------------------------

def snr_key(snr_db: float) -> int:
    """Non-negative integer identifying an SNR value (milli-dB resolution)."""
    if math.isinf(snr_db):
        return 2 ** 40
    return int(round(snr_db * 1000)) + 2 ** 32


def trial_rng(seed: int, snr_db: float, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, snr_key(snr_db), trial_index]))


def reference_power(cfg: SimConfig, tx: ComplexWaveform) -> float:
    """Signal power the SNR refers to.

    "sample": mean power of the transmitted samples over the full sampled
    bandwidth.  "occupied": power per occupied subcarrier, i.e. the sample
    power rescaled to the occupied share of the DFT bins.
    """
    if cfg.technology == "dot11p":
        p = 1.0  # unit power by construction
        occupied_share = dot11p.params.NUM_OCCUPIED / dot11p.params.DFT_SIZE
    else:
        # every transmitted cell has unit power; the last symbol is blank
        p = tx.mean_power()
        n_occ = cv2x.params.SC_PER_PRB * (2 + cv2x.mcs_scheme(cfg.mcs_scheme).n_prb)
        occupied_share = n_occ / cv2x.params.DFT_SIZE * (cv2x.params.NUM_SYMBOLS - 1) / cv2x.params.NUM_SYMBOLS
    if cfg.snr_reference == "sample":
        return p
    return p / occupied_share


def _through_channel(cfg: SimConfig, tx: ComplexWaveform, rng: np.random.Generator) -> ComplexWaveform:
    model = cfg.channel_model()
    n = tx.samples.size + ch.output_extension(model, tx.sample_rate_hz, cfg.fractional_delay)
    real = ch.realize(model, n, tx.sample_rate_hz, rng)
    return ch.apply(tx, real, model, cfg.fractional_delay, cfg.normalize_channel_power)


def _trial_dot11p(cfg: SimConfig, snr_db: float, rng: np.random.Generator) -> TrialOutcome:
    ppdu = dot11p.PpduConfig(dot11p.mcs(DOT11P_MCS[cfg.mcs_scheme]), cfg.payload_bytes,
                             int(rng.integers(1, 128)))
    bits = rng.integers(0, 2, 8 * cfg.payload_bytes).astype(np.int8)
    tx = dot11p.transmit(bits, ppdu)
    ref = reference_power(cfg, tx)
    lead = int(rng.integers(0, LEAD_MAX))
    padded = np.concatenate([np.zeros(lead), tx.samples, np.zeros(TAIL_PAD)])
    y = _through_channel(cfg, ComplexWaveform(padded, tx.sample_rate_hz), rng)
    y = add_awgn(y, snr_db, ref, rng)
    res = dot11p.receive(y, expected=ppdu)
    if res.failure == "sync":
        return TrialOutcome(True, "sync")
    if res.failure == "sig":
        return TrialOutcome(True, "header")
    if not np.array_equal(res.psdu_bits, bits):
        return TrialOutcome(True, "payload")
    return TrialOutcome(False)


def _trial_cv2x(cfg: SimConfig, snr_db: float, rng: np.random.Generator) -> TrialOutcome:
    mcs = cv2x.mcs_scheme(cfg.mcs_scheme)
    tb = rng.integers(0, 2, mcs.tbs_bits).astype(np.int8)
    shift = int(rng.choice(cv2x.params.CYCLIC_SHIFTS))
    tx = cv2x.transmit_subframe(tb, mcs, shift)
    ref = reference_power(cfg, tx.waveform)
    y = _through_channel(cfg, tx.waveform, rng)
    y = add_awgn(y, snr_db, ref, rng)
    res = cv2x.receive_subframe(y, tx.allocation, mcs)
    if res.failure == "sci":
        return TrialOutcome(True, "header")
    if res.failure == "payload" or not np.array_equal(res.tb_bits, tb):
        return TrialOutcome(True, "payload")
    return TrialOutcome(False)


def run_trial(cfg: SimConfig, snr_db: float, trial_index: int) -> TrialOutcome:
    """One transmission at ``snr_db``; deterministic in (seed, snr, trial_index)."""
    rng = trial_rng(cfg.seed, snr_db, trial_index)
    if cfg.technology == "dot11p":
        return _trial_dot11p(cfg, snr_db, rng)
    return _trial_cv2x(cfg, snr_db, rng)


def _run_batch(cfg: SimConfig, snr_db: float, indices: Sequence[int]) -> list:
    return [run_trial(cfg, snr_db, i) for i in indices]


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def run_point(cfg: SimConfig, snr_db: float, workers: int = 1,
              executor: Optional[ProcessPoolExecutor] = None) -> BlerPoint:
    """Trials until ``target_errors`` errors or ``max_trials`` trials.

    Outcomes are consumed in trial order, so the stopping trial and every
    counter are the same for any number of workers.
    """
    errors = trials = 0
    counters = {"sync": 0, "header": 0, "payload": 0}
    next_index = 0
    batch = 1 if workers <= 1 else 4 * workers
    own = None
    if workers > 1 and executor is None:
        own = executor = ProcessPoolExecutor(max_workers=workers)
    try:
        while trials < cfg.max_trials and errors < cfg.target_errors:
            n = min(batch, cfg.max_trials - next_index)
            indices = list(range(next_index, next_index + n))
            next_index += n
            if executor is None:
                outcomes = _run_batch(cfg, snr_db, indices)
            else:
                chunks = [indices[i::workers] for i in range(workers)]
                futures = [executor.submit(_run_batch, cfg, snr_db, c) for c in chunks if c]
                by_index = {}
                for c, f in zip([c for c in chunks if c], futures):
                    by_index.update(zip(c, f.result()))
                outcomes = [by_index[i] for i in indices]
            for out in outcomes:
                trials += 1
                if out.error:
                    errors += 1
                    counters[out.kind] += 1
                if errors >= cfg.target_errors:
                    break
    finally:
        if own is not None:
            own.shutdown()
    return BlerPoint.from_counts(snr_db, trials, errors, sync_fail=counters["sync"],
                                 header_fail=counters["header"], payload_fail=counters["payload"])


def run_sweep(cfg: SimConfig, workers: int = 1, progress=None) -> BlerCurve:
    """Run every SNR of ``cfg.snr_db_list``."""
    points = []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for snr in cfg.snr_db_list:
            p = run_point(cfg, snr, workers, executor)
            points.append(p)
            if progress is not None:
                progress(p)
    finally:
        if executor is not None:
            executor.shutdown()
    return BlerCurve(cfg.technology, cfg.mcs_scheme, cfg.channel, points, cfg.metadata())


# --------------------------------------------------------------------------
# Comparison
# --------------------------------------------------------------------------

class NotComparable(ValueError):
    """A curve does not cross the requested BLER."""


def _log_bler(p: BlerPoint) -> float:
    # zero-error points are clamped to half an error
    b = p.bler if p.errors > 0 else 1.0 / (2 * max(p.trials, 1))
    return math.log10(b)


def snr_at_bler(curve: BlerCurve, target_bler: float) -> float:
    """SNR where the curve first falls through ``target_bler`` (log-linear interpolation)."""
    if not 0 < target_bler < 1:
        raise ValueError("target BLER must be in (0, 1)")
    pts = curve.points
    t = math.log10(target_bler)
    for a, b in zip(pts, pts[1:]):
        la, lb = _log_bler(a), _log_bler(b)
        if la >= t >= lb and la != lb:
            return a.snr_db + (t - la) * (b.snr_db - a.snr_db) / (lb - la)
        if la == t:
            return a.snr_db
    if pts and _log_bler(pts[-1]) == t:
        return pts[-1].snr_db
    span = ", ".join(f"{p.snr_db:g} dB: {p.bler:.3g}" for p in pts)
    raise NotComparable(f"{curve.label} never crosses BLER {target_bler:g} ({span})")


def compare(curve_a: BlerCurve, curve_b: BlerCurve, target_bler: float = 0.1) -> float:
    """Gain SNR_a(target) - SNR_b(target) in dB."""
    return snr_at_bler(curve_a, target_bler) - snr_at_bler(curve_b, target_bler)


# --------------------------------------------------------------------------
# Export
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def format_csv(curves: Sequence[BlerCurve]) -> str:
    lines = [CSV_HEADER]
    for c in curves:
        lines.append(f"# curve {c.technology} {c.mcs} {c.channel}")
        for k in sorted(c.metadata):
            lines.append(f"# meta {k}={_fmt(c.metadata[k])}")
        for p in c.points:
            lines.append(f"# counters {p.snr_db!r} sync_fail={p.sync_fail} "
                         f"header_fail={p.header_fail} payload_fail={p.payload_fail}")
        for p in c.points:
            lines.append(",".join([c.technology, c.mcs, c.channel, repr(p.snr_db), str(p.trials),
                                   str(p.errors), repr(p.bler), repr(p.ci_low), repr(p.ci_high)]))
    return "\n".join(lines) + "\n"


def export_csv(curves: Sequence[BlerCurve], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(curves))


def parse_csv(text: str) -> list:
    """Inverse of :func:`format_csv`."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError("not a BLER CSV: header mismatch")
    curves: dict = {}
    order = []
    meta: dict = {}
    counters: dict = {}

    def curve_for(key):
        if key not in curves:
            curves[key] = BlerCurve(*key, points=[], metadata=meta.get(key, {}))
            order.append(key)
        return curves[key]

    current = None
    for line in lines[1:]:
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["curve"]:
                current = tuple(parts[1:4])
                meta.setdefault(current, {})
            elif parts[:1] == ["meta"] and current is not None:
                k, _, v = " ".join(parts[1:]).partition("=")
                meta[current][k] = v
            elif parts[:1] == ["counters"] and current is not None:
                snr = float(parts[1])
                counters[(current, snr)] = {kv.split("=")[0]: int(kv.split("=")[1]) for kv in parts[2:]}
            continue
        tech, mcs, chan, snr, trials, errors, bler, lo, hi = line.split(",")
        key = (tech, mcs, chan)
        p = BlerPoint(float(snr), int(trials), int(errors), float(bler), float(lo), float(hi),
                      **counters.get((key, float(snr)), {}))
        curve_for(key).points.append(p)
    for key in order:
        curves[key].metadata = meta.get(key, {})
    return [curves[k] for k in order]


def load_csv(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_csv(fh.read())


ZERO_BLER_FLOOR = 1e-6


def export_plot(curves: Sequence[BlerCurve], path, title: Optional[str] = None) -> None:
    """Log-scale BLER vs SNR as a standalone SVG.

    Zero-error points are drawn at 1e-6 with open markers (SVG id prefix
    ``zero-bler``).
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for i, c in enumerate(curves):
        snr = np.array([p.snr_db for p in c.points])
        bler = np.array([p.bler for p in c.points])
        zero = bler <= 0
        color = f"C{i % 10}"
        line, = ax.semilogy(snr, np.where(zero, ZERO_BLER_FLOOR, bler), "-o", color=color, label=c.label)
        line.set_gid(f"curve-{i}")
        if zero.any():
            marks, = ax.semilogy(snr[zero], np.full(zero.sum(), ZERO_BLER_FLOOR), "o", color=color,
                                 markerfacecolor="none", markersize=9)
            marks.set_gid(f"zero-bler-{i}")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("BLER")
    ax.set_ylim(ZERO_BLER_FLOOR / 2, 1.5)
    ax.grid(True, which="both", alpha=0.3)
    if curves:
        ax.legend(fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    plt.rcParams["svg.hashsalt"] = "v2xlink"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
