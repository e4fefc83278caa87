"""Command line entry point: ``mfda run|preset|validate``."""

import argparse
import sys

from mfda.config import ConfigError, load_config, load_preset, preset_names, validate_config
from mfda.experiment import run_experiment


def _overrides(cfg, args):
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "csi", None) is not None:
        changes["csi"] = args.csi
    return validate_config(cfg.replace(**changes)) if changes else cfg


def _run(cfg, args):
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    status, paths = run_experiment(cfg, output_dir=args.output_dir, threads=args.threads,
                                   record_wall_time=args.wall_time)
    for p in paths:
        print(p)
    if status:
        print("some rows failed; see the status column", file=sys.stderr)
    return status


def build_parser():
    parser = argparse.ArgumentParser(prog="mfda", description="MFDA secrecy-capacity experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help="root seed (overrides the config)")
        p.add_argument("--output-dir", help="directory for CSV and manifest files")
        p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--csi", choices=("perfect", "imperfect"), help="override the CSI model")
        p.add_argument("--wall-time", action="store_true",
                       help="fill the wall_ms CSV column (breaks byte-identical reruns)")

    p_run = sub.add_parser("run", help="run an experiment config file")
    p_run.add_argument("config")
    common(p_run)
    p_pre = sub.add_parser("preset", help="run a bundled figure preset")
    p_pre.add_argument("name", help="one of: " + ", ".join(preset_names()))
    common(p_pre)
    p_val = sub.add_parser("validate", help="check a config file without solving")
    p_val.add_argument("config")
    p_val.add_argument("--csi", choices=("perfect", "imperfect"))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = _overrides(load_config(args.config), args)
            print(f"{args.config}: ok ({cfg.kind}, {len(cfg.sweeps)} sweep(s), schemes {', '.join(cfg.schemes)})")
            return 0
        cfg = load_config(args.config) if args.command == "run" else load_preset(args.name)
        return _run(_overrides(cfg, args), args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
