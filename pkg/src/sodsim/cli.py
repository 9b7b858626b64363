"""``sim`` command line entry point."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config, harness, suites
from .errors import ConfigError, SodSimError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CHECK_FAILED = 3


def _add_config_args(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_sweep(args) -> int:
    cfg = config.load(args.config, args.set)
    exp = harness.Experiment("sweep", harness.parse_engines(args.engines),
                             sweep=harness.DensitySweep.parse(args.density), seed=args.seed)
    rows = harness.run_sweep(exp, cfg)
    _write(args.out, harness.to_csv(rows))
    if args.out not in (None, "-") and not args.no_plot:
        harness.plot_sweep(rows, harness.figure_path(args.out))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = config.load(args.config, args.set)
    engines = harness.parse_engines(args.engines)
    if not engines:
        raise ValueError("at least one engine is required")
    rows = harness.run_benchmark(args.model, engines, cfg, seed=args.seed)
    _write(args.out, harness.to_csv(rows))
    if args.out not in (None, "-") and not args.no_plot:
        harness.plot_benchmark([r for r in rows if r[1].layer != harness.AVERAGE],
                               harness.figure_path(args.out))
    for kind in engines:
        if kind == "sod":
            continue
        tpa, eff = harness.advantages(rows, kind)
        print(f"{args.model}: sod/{kind} tpa {tpa:.2f}x energy-eff {eff:.2f}x", file=sys.stderr)
    return EXIT_OK


def cmd_encode(args) -> int:
    cfg = config.load(args.config, args.set)
    harness.encode_file(args.input, args.output, cfg)
    return EXIT_OK


def cmd_decode(args) -> int:
    harness.decode_file(args.input, args.output)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = config.load(args.config, args.set)
    table, checks = harness.calibration(cfg)
    _write(args.out, harness.calibration_report(table, checks))
    return EXIT_OK if all(c.ok for c in checks) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sim", description="Sparse-on-dense accelerator simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="density sweep on one layer")
    p.add_argument("--density", default="0.1:1.0:0.1", help="start:end:step (inclusive)")
    p.add_argument("--engines", default="sod,dense")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--no-plot", action="store_true")
    _add_config_args(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("bench", help="layer-wise benchmark of a pruned model")
    p.add_argument("--model", required=True, choices=suites.MODELS)
    p.add_argument("--engines", default="sod,dense")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--no-plot", action="store_true")
    _add_config_args(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("encode", help="dense .npy -> CSC file")
    p.add_argument("input")
    p.add_argument("output")
    _add_config_args(p)
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("decode", help="CSC file -> dense .npy")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("calibrate", help="area/throughput calibration report")
    p.add_argument("--out", default="-")
    _add_config_args(p)
    p.set_defaults(fn=cmd_calibrate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, SodSimError, ValueError) as e:
        print(f"sim: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"sim: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
