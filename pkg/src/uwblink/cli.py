"""Command-line front end: experiment orchestration and artifact emission.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import channel as channel_mod
from . import equalizer as eq_mod
from . import report
from . import txrx
from .ber import (
    ReceiverConfig,
    ensemble_ber,
    snr_at_ber,
    write_curve_csv,
)
from .pulse import PulseSpec, dump_waveform, matched_autocorrelation, render_pulse

OUTPUT_DIR_ENV = "UWBLINK_OUTDIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

_RECEIVERS = ("rake", "mmse", "rake-le", "rake-dfe")
_METHODS = ("mc", "series", "chernoff", "all")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    channel: str = "cm3"
    receivers: tuple[str, ...] = ("rake", "rake-le", "rake-dfe")
    fingers: int = 10
    k1: int = 10
    k2: int = 10
    snr_start: float = 0.0
    snr_stop: float = 20.0
    snr_step: float = 2.0
    realizations: int = 50
    payload_symbols: int = 2048
    training_symbols: int = 512
    symbol_duration: float = 5.0
    rolloff: float = 0.5
    oversampling: int = 8
    pulse: str = "rrc"
    epsilon: float = 0.5
    span_symbols: int = 8
    seed: int = 1
    method: str = "series"
    workers: int = 1
    output: str = "."

    def __post_init__(self):
        if self.snr_step <= 0:
            raise UsageError("snr step must be positive")
        if self.snr_stop < self.snr_start:
            raise UsageError("snr stop must be >= start")
        if self.realizations < 1:
            raise UsageError("realizations must be >= 1")
        if self.fingers < 1 or self.k1 < 0 or self.k2 < 0:
            raise UsageError("fingers must be >= 1 and tap counts nonnegative")
        if self.method not in _METHODS:
            raise UsageError(f"unknown method {self.method!r}")
        for r in self.receivers:
            if r not in _RECEIVERS:
                raise UsageError(f"unknown receiver {r!r}")
        if not self.receivers:
            raise UsageError("no receivers selected")

    def snr_grid(self) -> np.ndarray:
        n = int(np.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9)) + 1
        return self.snr_start + self.snr_step * np.arange(n)

    def sv_params(self) -> channel_mod.SvParams:
        key = self.channel.lower()
        if key in channel_mod.PRESETS:
            return channel_mod.PRESETS[key]
        try:
            return channel_mod.load_sv_params(self.channel)
        except OSError as exc:
            raise UsageError(f"cannot read channel file {self.channel}: {exc}") from exc

    def pulse_spec(self) -> PulseSpec:
        return PulseSpec(
            kind=self.pulse,
            symbol_duration=self.symbol_duration,
            oversampling=self.oversampling,
            span_symbols=self.span_symbols,
            rolloff=self.rolloff,
            epsilon=self.epsilon,
        )

    def frame_spec(self) -> txrx.FrameSpec:
        return txrx.FrameSpec(
            payload_symbols=self.payload_symbols,
            training_symbols=self.training_symbols,
            symbol_duration=self.symbol_duration,
        )


_CONFIG_KEYS = {
    "channel": str,
    "receivers": str,
    "fingers": int,
    "k1": int,
    "k2": int,
    "snr_start": float,
    "snr_stop": float,
    "snr_step": float,
    "realizations": int,
    "payload_symbols": int,
    "training_symbols": int,
    "symbol_duration": float,
    "rolloff": float,
    "oversampling": int,
    "pulse": str,
    "epsilon": float,
    "span_symbols": int,
    "seed": int,
    "method": str,
    "workers": int,
    "output": str,
}


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for ln, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected key = value")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{ln}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise UsageError(f"{path}:{ln}: bad value for {key}: {val!r}") from exc
    return values


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="uwblink",
        description="Link-level UWB receiver simulator (Rake / MMSE / Rake-MMSE)",
    )
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--channel", help="cm3, cm4, or an S-V parameter file path")
    p.add_argument("--receiver", help="comma list of rake,mmse,rake-le,rake-dfe or 'all'")
    p.add_argument("--fingers", type=int, help="Rake fingers L")
    p.add_argument("--taps", help="equalizer taps K1,K2")
    p.add_argument("--snr", help="Eb/N0 grid start:stop:step in dB")
    p.add_argument("--realizations", type=int, help="channel realizations to average")
    p.add_argument("--symbols", type=int, help="payload symbols per packet")
    p.add_argument("--training", type=int, help="training symbols per packet")
    p.add_argument("--rolloff", type=float, help="RRC roll-off factor")
    p.add_argument("--pulse", choices=("rrc", "gaussian-doublet"), help="transmit pulse shape")
    p.add_argument("--epsilon", type=float, help="Gaussian-doublet width (ns)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--method", choices=_METHODS, help="BER evaluation method")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--output", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--dump-pulse", metavar="PATH", help="write the rendered pulse and exit")
    p.add_argument("--dump-taps", metavar="PATH",
                   help="write the first realization's equalizer taps and exit")
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib output")
    return p


def parse_config(argv) -> tuple[ExperimentConfig, argparse.Namespace]:
    """Merge config file and flags (flags win) into an ExperimentConfig."""
    args = _build_parser().parse_args(argv)
    values: dict = {}
    if args.config:
        values.update(_read_config_file(args.config))
    if "receivers" in values:
        values["receivers"] = _parse_receivers(values["receivers"])

    if args.channel is not None:
        values["channel"] = args.channel
    if args.receiver is not None:
        values["receivers"] = _parse_receivers(args.receiver)
    if args.fingers is not None:
        values["fingers"] = args.fingers
    if args.taps is not None:
        try:
            k1, k2 = (int(x) for x in args.taps.split(","))
        except ValueError as exc:
            raise UsageError(f"--taps wants K1,K2 (got {args.taps!r})") from exc
        values["k1"], values["k2"] = k1, k2
    if args.snr is not None:
        try:
            start, stop, step = (float(x) for x in args.snr.split(":"))
        except ValueError as exc:
            raise UsageError(f"--snr wants start:stop:step (got {args.snr!r})") from exc
        values["snr_start"], values["snr_stop"], values["snr_step"] = start, stop, step
    if args.realizations is not None:
        values["realizations"] = args.realizations
    if args.symbols is not None:
        values["payload_symbols"] = args.symbols
    if args.training is not None:
        values["training_symbols"] = args.training
    if args.rolloff is not None:
        values["rolloff"] = args.rolloff
    if args.pulse is not None:
        values["pulse"] = args.pulse
    if args.epsilon is not None:
        values["epsilon"] = args.epsilon
    if args.seed is not None:
        values["seed"] = args.seed
    if args.method is not None:
        values["method"] = args.method
    if args.workers is not None:
        values["workers"] = args.workers
    if args.output is not None:
        values["output"] = args.output
    elif "output" not in values:
        values["output"] = os.environ.get(OUTPUT_DIR_ENV, ".")

    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    return cfg, args


def _parse_receivers(text: str) -> tuple[str, ...]:
    if text.strip() == "all":
        return _RECEIVERS
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


def run_experiment(cfg: ExperimentConfig, make_figures: bool = True) -> dict:
    """Run every requested (receiver, method) sweep and write artifacts.

    Returns {receiver: {method: BerCurve}}; writes one CSV per curve, a
    summary, a gnuplot script and (optionally) a PNG figure per method.
    """
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    params = cfg.sv_params()
    methods = ("series",) if cfg.method == "series" else \
        ("monte-carlo",) if cfg.method == "mc" else \
        ("chernoff",) if cfg.method == "chernoff" else \
        ("monte-carlo", "series", "chernoff")

    results: dict = {}
    csv_by_method: dict[str, dict[str, str]] = {m: {} for m in methods}
    for rx_name in cfg.receivers:
        receiver = ReceiverConfig(kind=rx_name, fingers=cfg.fingers, k1=cfg.k1, k2=cfg.k2)
        results[rx_name] = {}
        for method in methods:
            curve = ensemble_ber(
                params,
                receiver,
                cfg.snr_grid(),
                cfg.realizations,
                method=method,
                master_seed=cfg.seed,
                pulse_spec=cfg.pulse_spec(),
                frame=cfg.frame_spec(),
                workers=cfg.workers,
            )
            results[rx_name][method] = curve
            csv_path = outdir / f"{rx_name}_{method}.csv"
            write_curve_csv(curve.points, csv_path)
            csv_by_method[method][rx_name] = csv_path.name

    summary_lines = []
    for method in methods:
        curves = {rx: results[rx][method] for rx in cfg.receivers}
        summary_lines.append(f"[{method}] channel={cfg.channel} "
                             f"L={cfg.fingers} K1={cfg.k1} K2={cfg.k2}")
        summary_lines.append(report.summarize(curves))
        report.emit_plot_script(csv_by_method[method], outdir / f"plot_{method}.gp")
        if make_figures:
            report.save_ber_figure(
                curves,
                outdir / f"ber_{method}.png",
                title=f"{cfg.channel.upper()} {method}",
            )
    summary = "\n".join(summary_lines)
    (outdir / "summary.txt").write_text(summary + "\n")
    return results


def _dump_taps(cfg: ExperimentConfig, path: str) -> None:
    """Design the first realization's equalizer and dump lag,coefficient rows."""
    from . import ber as ber_mod
    from . import rng

    m = matched_autocorrelation(render_pulse(cfg.pulse_spec()))
    realization = channel_mod.generate_realization(
        cfg.sv_params(), rng.child_seed(cfg.seed, 1, 0))
    receiver = ReceiverConfig(kind=cfg.receivers[0], fingers=cfg.fingers,
                              k1=cfg.k1, k2=cfg.k2)
    comp, noise_scale = ber_mod.build_chain(realization, receiver, m, cfg.frame_spec())
    n0 = ber_mod.snr_to_n0(cfg.snr_start)
    design = ber_mod.design_for(receiver, comp, noise_scale, n0)
    kind = "DFE" if design.kind == "dfe" else "LE"
    with open(path, "w") as fh:
        fh.write(f"# jmin={design.j_min!r} kind={kind}\n")
        for i, c in enumerate(design.feedforward):
            fh.write(f"{i - design.k1},{float(c)!r}\n")
        for i, b in enumerate(design.feedback, start=1):
            fh.write(f"{i},{float(b)!r}\n")


def main(argv=None) -> int:
    try:
        cfg, args = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse already printed a message
        return EXIT_USAGE if exc.code else EXIT_OK

    try:
        if args.dump_pulse:
            dump_waveform(render_pulse(cfg.pulse_spec()), args.dump_pulse)
            return EXIT_OK
        if args.dump_taps:
            _dump_taps(cfg, args.dump_taps)
            return EXIT_OK
        results = run_experiment(cfg, make_figures=not args.no_figures)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    print((Path(cfg.output) / "summary.txt").read_text(), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
