"""``goosesec`` command line.

    goosesec run [--config FILE] [--seed N] [--out FILE] [--check] [--format text|json] [--trace ATTACK:MODE]
    goosesec bench [--config FILE] [--out FILE] [--budget MS] [--packets N]
    goosesec capture-export [--config FILE] [--out DIR]

Exit status: 0 on success, 1 when ``--check`` finds a cell that differs from
the expected matrix or ``--budget`` is exceeded, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .attacks import AttackKind
from .config import ConfigError, ScenarioConfig, load_config
from .pipeline import Mode
from .scenario import (
    bench,
    export_captures,
    render_latency,
    render_report,
    render_trace,
    run_cell,
    run_matrix,
)

log = logging.getLogger("goosesec")

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", type=Path, default=default, help="scenario file (INI)")
    parser.add_argument("--seed", type=int, default=default, help="override the scenario seed")
    parser.add_argument("--out", type=Path, default=default, help="output file (run, bench) or directory (capture-export)")
    parser.add_argument(
        "--check", action="store_true", default=argparse.SUPPRESS if suppress else False,
        help="exit 1 if the matrix differs from the expected one",
    )
    parser.add_argument("--budget", type=float, default=default, help="exit 1 if any maximum latency reaches MS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goosesec", description="Secure GOOSE attack/mitigation scenarios.")
    _common(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the attack x mitigation matrix")
    _common(run, suppress=True)
    run.add_argument("--format", choices=("text", "json"), default="text")
    run.add_argument("--trace", metavar="ATTACK:MODE", help="print the console trace of one cell instead")

    b = sub.add_parser("bench", help="measure per-packet processing time of each mode")
    _common(b, suppress=True)
    b.add_argument("--packets", type=int, help="number of packets (default from config)")

    cap = sub.add_parser("capture-export", help="write one pcap per matrix cell")
    _common(cap, suppress=True)
    return parser


def _load(args) -> ScenarioConfig:
    if args.config is None:
        cfg = ScenarioConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        return cfg
    return load_config(args.config, seed=args.seed)


def _emit(data: bytes, out: Path | None) -> None:
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(data)
        log.info("wrote %s", out)


def _cmd_run(args, cfg: ScenarioConfig) -> int:
    if args.trace:
        try:
            attack_name, mode_name = args.trace.split(":")
            kind, mode = AttackKind(attack_name), Mode(mode_name)
        except ValueError:
            raise ConfigError(f"--trace expects ATTACK:MODE, got {args.trace!r}") from None
        if kind not in cfg.attacks:
            raise ConfigError(f"attack {kind.value} is not configured")
        _emit(render_trace(run_cell(cfg, cfg.attacks[kind], mode)).encode("utf-8"), args.out)
        return EXIT_OK
    report = run_matrix(cfg)
    _emit(render_report(report, args.format), args.out or cfg.report_path)
    if args.check:
        bad = report.mismatches()
        for line in bad:
            print(f"mismatch: {line}", file=sys.stderr)
        if bad:
            return EXIT_MISMATCH
        print("matrix matches the expected outcomes", file=sys.stderr)
    return EXIT_OK


def _cmd_bench(args, cfg: ScenarioConfig) -> int:
    stats = bench(cfg, args.packets)
    for mode, s in stats.items():
        if s.low_confidence:
            log.warning("%s: only %d samples, figures are low confidence", mode.value, s.count)
    text = render_latency(stats)
    sys.stdout.write(text)
    twin = {mode.value: s.as_record() for mode, s in stats.items()}
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(twin, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(json.dumps(twin, sort_keys=True) + "\n")
    if args.budget is not None:
        over = [m.value for m, s in stats.items() if not s.max_ms < args.budget]
        if over:
            print(f"budget {args.budget} ms exceeded by: {', '.join(over)}", file=sys.stderr)
            return EXIT_MISMATCH
    return EXIT_OK


def _cmd_capture_export(args, cfg: ScenarioConfig) -> int:
    directory = args.out or cfg.pcap_dir or Path("captures")
    for path in export_captures(run_matrix(cfg), directory):
        print(path)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "bench": _cmd_bench, "capture-export": _cmd_capture_export}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
