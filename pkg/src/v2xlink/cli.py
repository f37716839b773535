"""Command-line front end: ``v2xlink list-channels | run | compare``."""

from __future__ import annotations

import argparse
import math
import os
import secrets
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import channel as ch
from . import harness
from .dsp import ConfigurationError

OUTPUT_DIR_ENV = "V2XLINK_OUTPUT_DIR"
EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

MANIFEST_KEYS = {
    "technology", "mcs_scheme", "channels", "snr_db", "seed", "max_trials", "target_errors",
    "max_doppler_hz", "payload_bytes", "snr_reference", "fractional_delay",
    "normalize_channel_power", "workers", "out", "plot",
}


@dataclass
class RunManifest:
    technology: str
    mcs_scheme: str
    channels: list
    snr_db: list
    seed: int
    max_trials: int = 5000
    target_errors: int = 100
    max_doppler_hz: float = ch.DEFAULT_MAX_DOPPLER_HZ
    payload_bytes: int = 300
    snr_reference: str = "sample"
    fractional_delay: bool = False
    normalize_channel_power: bool = False
    workers: int = field(default_factory=harness.default_workers)
    out: Optional[str] = None
    plot: Optional[str] = None

    def sim_configs(self) -> list:
        return [harness.SimConfig(
            self.technology, self.mcs_scheme, c, tuple(self.snr_db), self.payload_bytes,
            self.max_trials, self.target_errors, self.seed, self.max_doppler_hz,
            self.snr_reference, self.fractional_delay, self.normalize_channel_power)
            for c in self.channels]

    def output_path(self) -> Path:
        if self.out:
            return Path(self.out)
        base = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
        return base / f"{self.technology}_{self.mcs_scheme}_seed{self.seed}.csv"


def parse_snr(spec) -> list:
    """``start:step:stop`` (inclusive) or a comma separated / YAML list."""
    if isinstance(spec, (list, tuple)):
        return [float(s) for s in spec]
    if isinstance(spec, (int, float)):
        return [float(spec)]
    text = str(spec).strip()
    try:
        if ":" in text:
            start, step, stop = (float(p) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise ConfigurationError(f"bad SNR range {text!r}: need step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 10) for i in range(n)]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"cannot parse SNR specification {text!r}") from None


def _channels(value) -> list:
    if isinstance(value, str):
        return [c.strip() for c in value.split(",") if c.strip()]
    return list(value)


def build_manifest(args: argparse.Namespace) -> RunManifest:
    """Merge an optional YAML manifest with command-line flags (flags win)."""
    values: dict = {}
    if args.config:
        try:
            loaded = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigurationError("config file must hold a mapping")
        unknown = set(loaded) - MANIFEST_KEYS
        if unknown:
            raise ConfigurationError(
                f"unknown config keys: {', '.join(sorted(unknown))}; allowed: {', '.join(sorted(MANIFEST_KEYS))}")
        values.update(loaded)
    flags = {
        "technology": args.tech, "mcs_scheme": args.mcs, "channels": args.channel,
        "snr_db": args.snr, "seed": args.seed, "max_trials": args.max_trials,
        "target_errors": args.target_errors, "max_doppler_hz": args.doppler,
        "payload_bytes": args.payload_bytes, "snr_reference": args.snr_reference,
        "workers": args.workers, "out": args.out, "plot": args.plot,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    if args.fractional_delay:
        values["fractional_delay"] = True
    if args.normalize_channel_power:
        values["normalize_channel_power"] = True
    missing = [k for k in ("technology", "mcs_scheme", "channels", "snr_db") if k not in values]
    if missing:
        names = {"technology": "--tech", "mcs_scheme": "--mcs", "channels": "--channel", "snr_db": "--snr"}
        raise ConfigurationError("missing required setting(s): " + ", ".join(names[m] for m in missing))
    values["channels"] = _channels(values["channels"])
    values["snr_db"] = parse_snr(values["snr_db"])
    if values.get("seed") is None:
        values["seed"] = secrets.randbits(63)
        print(f"seed not given; using {values['seed']}", file=sys.stderr)
    manifest = RunManifest(**values)
    for c in manifest.channels:
        ch.preset(c)
    manifest.sim_configs()  # validates everything before any trial runs
    return manifest


def cmd_list_channels(fmt: str = "table") -> int:
    if fmt == "csv":
        sys.stdout.write(ch.presets_csv())
        return EXIT_OK
    print(f"{'model':<24}{'taps':>5}  {'delays (ns)':<44}{'gains (dB)':<48}doppler (Hz)")
    for name, model in ch.PRESETS.items():
        delays = ", ".join(f"{d:g}" for d in model.delays_ns)
        gains = ", ".join(f"{g:g}" for g in model.gains_db)
        dop = ", ".join(f"{f:g}" for f in model.dopplers_hz)
        print(f"{name:<24}{len(model.taps):>5}  [{delays}]".ljust(75) + f"[{gains}]".ljust(48) + f"[{dop}]")
    print(f"ITU taps use a Jakes spectrum with max Doppler {ch.DEFAULT_MAX_DOPPLER_HZ:g} Hz unless --doppler is set;")
    print(f"Tiger-Team taps after the first are shifted by the listed Doppler with +-{ch.DEFAULT_SHIFTED_SPREAD_HZ:g} Hz spread.")
    return EXIT_OK


def cmd_run(manifest: RunManifest, dry_run: bool = False) -> int:
    if dry_run:
        print(yaml.safe_dump(asdict(manifest), sort_keys=True), end="")
        return EXIT_OK
    curves = []
    for cfg in manifest.sim_configs():
        def progress(p, name=cfg.channel):
            print(f"{cfg.technology} {cfg.mcs_scheme} {name} snr={p.snr_db:g} dB "
                  f"trials={p.trials} errors={p.errors} bler={p.bler:.4g}", file=sys.stderr)
        curves.append(harness.run_sweep(cfg, manifest.workers, progress))
    out = manifest.output_path()
    out.parent.mkdir(parents=True, exist_ok=True)
    harness.export_csv(curves, out)
    print(f"wrote {out}")
    if manifest.plot:
        harness.export_plot(curves, manifest.plot)
        print(f"wrote {manifest.plot}")
    return EXIT_OK


def cmd_compare(path_a: str, path_b: str, target_bler: float) -> int:
    a = harness.load_csv(path_a)
    b = harness.load_csv(path_b)
    if len(a) == 1 and len(b) == 1:
        pairs = [(a[0], b[0])]
    else:
        index = {(c.mcs, c.channel): c for c in b}
        pairs = [(c, index[(c.mcs, c.channel)]) for c in a if (c.mcs, c.channel) in index]
    print(f"target BLER {target_bler:g}; gain = SNR(a) - SNR(b)")
    for ca, cb in pairs:
        try:
            sa = harness.snr_at_bler(ca, target_bler)
            sb = harness.snr_at_bler(cb, target_bler)
            print(f"{ca.channel:<24}{ca.mcs:<20} a={sa:8.3f} dB  b={sb:8.3f} dB  gain={sa - sb:7.3f} dB")
        except harness.NotComparable as exc:
            print(f"{ca.channel:<24}{ca.mcs:<20} gain=n/a  ({exc})")
    if not pairs:
        print("no matching curves (same mcs and channel) found")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="v2xlink", description="802.11p vs C-V2X link-level BLER simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    lc = sub.add_parser("list-channels", help="print the channel presets")
    lc.add_argument("--format", choices=("table", "csv"), default="table")

    run = sub.add_parser("run", help="run a BLER sweep")
    run.add_argument("--config", help="YAML manifest; flags override its values")
    run.add_argument("--tech", choices=harness.TECHNOLOGIES)
    run.add_argument("--mcs", choices=harness.MCS_SCHEMES)
    run.add_argument("--channel", help="preset name, or comma separated names")
    run.add_argument("--snr", help="start:step:stop (inclusive) or comma separated list, dB")
    run.add_argument("--seed", type=int)
    run.add_argument("--max-trials", type=int)
    run.add_argument("--target-errors", type=int)
    run.add_argument("--doppler", type=float, help="max Doppler of ITU taps in Hz (default 500)")
    run.add_argument("--payload-bytes", type=int)
    run.add_argument("--snr-reference", choices=harness.SNR_REFERENCES)
    run.add_argument("--fractional-delay", action="store_true")
    run.add_argument("--normalize-channel-power", action="store_true")
    run.add_argument("--workers", type=int)
    run.add_argument("--out", help=f"CSV path (default: ${OUTPUT_DIR_ENV} or the working directory)")
    run.add_argument("--plot", help="SVG plot path")
    run.add_argument("--dry-run", action="store_true", help="print the resolved manifest and exit")
    run.set_defaults(usage=run.format_usage)

    cmp_ = sub.add_parser("compare", help="SNR gain between two result files")
    cmp_.add_argument("csv_a")
    cmp_.add_argument("csv_b")
    cmp_.add_argument("--target-bler", type=float, default=0.1)
    return parser


def _attach_negative_snr(argv: list) -> list:
    """Glue ``--snr -2:1:8`` into ``--snr=-2:1:8``; argparse would read -2:1:8 as an option."""
    out = []
    it = iter(argv)
    for a in it:
        if a == "--snr":
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-") and nxt[1:2].isdigit():
                out.append(f"--snr={nxt}")
                continue
            out.append(a)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(a)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(_attach_negative_snr(argv))
    try:
        if args.command == "list-channels":
            return cmd_list_channels(args.format)
        if args.command == "run":
            return cmd_run(build_manifest(args), args.dry_run)
        return cmd_compare(args.csv_a, args.csv_b, args.target_bler)
    except ConfigurationError as exc:
        if getattr(args, "usage", None):
            sys.stderr.write(args.usage())
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
