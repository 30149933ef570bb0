"""Command-line entry points.

Subcommands: validate, sweep, diagnostics, fbar, fast.
Exit codes: 0 success, 2 invalid config, 3 inconclusive order fit, 4 I/O.
"""

from __future__ import annotations

import argparse
import io
import sys as _sys

import numpy as np

from .config import load_config, validate_config
from .errors import ConfigError
from .fast import simulate_fast
from .runner import export_fbar, run_diagnostics, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfwave",
        description="Slow-fast stochastic wave simulation lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="path to a TOML config, or a preset name "
                            "(smoke, acceptance, diagnostics)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override sweep.base_seed")
        p.add_argument("--threads", type=int, default=1,
                       help="replica blocks dispatched to this many threads")

    common(sub.add_parser("validate", help="check a config, run nothing"))
    p = sub.add_parser("sweep", help="weak-error sweep, order fit, corrector")
    common(p)
    p.add_argument("--save-terminals", action="store_true",
                   help="also write terminal states as JSON records")
    common(sub.add_parser("diagnostics",
                          help="mixing/ergodicity/uniform-bound diagnostics"))
    common(sub.add_parser("fbar",
                          help="export the averaged drift at the initial field"))
    p = sub.add_parser("fast", help="export one fast-process trajectory")
    common(p)
    p.add_argument("--horizon", type=float, default=1.0,
                   help="fast-clock horizon")
    p.add_argument("--step", type=float, default=1e-3, help="fast step")
    p.add_argument("--snapshots", type=int, default=100,
                   help="number of retained snapshots")
    return parser


def _load(args):
    data = load_config(args.config)
    if args.seed is not None:
        data.setdefault("sweep", {})["base_seed"] = args.seed
    cfg, errors = validate_config(data)
    if errors:
        for err in errors:
            print(f"config error: {err}", file=_sys.stderr)
        raise ConfigError(f"{len(errors)} validation error(s)")
    return cfg


def _cmd_validate(args) -> int:
    _load(args)
    print("config valid (0 warnings)")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    manifest, report = run_sweep(
        cfg, args.out, threads=args.threads,
        save_terminals=args.save_terminals,
    )
    print(f"wrote {len(manifest.outputs) + 1} files to {args.out}")
    if report["status"] != "ok":
        print("order fit inconclusive: fewer than 3 points above the "
              "noise floor", file=_sys.stderr)
        return EXIT_INCONCLUSIVE
    print(
        f"slope={report['slope']:.3f} r2={report['r_squared']:.3f} "
        f"u1={report['u1']:.4g} (ci {report['u1_ci']:.2g})"
    )
    return EXIT_OK


def _cmd_diagnostics(args) -> int:
    cfg = _load(args)
    manifest, report = run_diagnostics(cfg, args.out)
    print(f"wrote {len(manifest.outputs) + 1} files to {args.out}")
    print(
        "contraction rate/eta = "
        f"{report['contraction']['rate_over_eta']:.2f}, "
        f"decay rate/eta = {report['fbar_decay']['rate_over_eta']:.2f}"
    )
    return EXIT_OK


def _cmd_fbar(args) -> int:
    cfg = _load(args)
    outputs = export_fbar(cfg, args.out)
    print(f"wrote {len(outputs)} files to {args.out}")
    return EXIT_OK


def _cmd_fast(args) -> int:
    cfg = _load(args)
    rng = cfg.stream().substream("fast-cli").generator()
    every = max(int(np.ceil(args.horizon / args.step)) // args.snapshots, 1)
    _, snaps = simulate_fast(
        cfg.y0, args.horizon, args.step, cfg.system, rng, snapshot_every=every
    )
    buf = io.StringIO()
    n = cfg.basis.N
    buf.write("t," + ",".join(f"mode_{k}" for k in range(1, n + 1)) + "\n")
    for t, y in snaps:
        buf.write(",".join([repr(float(t))] + [repr(float(c)) for c in y]) + "\n")
    from .runner import _OutputDir

    out = _OutputDir(args.out)
    out.write("fast.csv", buf.getvalue())
    print(f"wrote fast.csv to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "sweep": _cmd_sweep,
    "diagnostics": _cmd_diagnostics,
    "fbar": _cmd_fbar,
    "fast": _cmd_fast,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=_sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
