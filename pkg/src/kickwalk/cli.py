"""``simulate``: run one ensemble (or a figure sweep) and write its data files."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from .engine import run_ensemble
from .io import (
    ConfigError,
    config_from_manifest,
    default_output_root,
    parse_config,
    preset,
    preset_names,
    sweep,
    write_results,
)
from .walk import NumericalInvariantError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("kickwalk")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Monte-Carlo simulation of a momentum-space quantum walk with spontaneous emission.",
    )
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="INI file with [physics], [walk], [se], [ensemble], [output]")
    src.add_argument("--preset", choices=preset_names(), help="figure preset")
    src.add_argument("--sweep", choices=["fig3", "fig4", "fig5"], help="run every preset of a figure")
    src.add_argument("--manifest", type=Path, help="re-run the configuration stored in a manifest.json")
    p.add_argument("--seed", type=int)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--out", type=Path, help="output directory (default: $KICKWALK_OUTPUT_ROOT/<name>)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for trajectories")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def _overrides(config, args):
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trajectories is not None:
        changes["trajectories"] = args.trajectories
    return config.replace(**changes) if changes else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    warnings.simplefilter("default")
    root = default_output_root()
    try:
        if args.sweep:
            out = args.out or root / args.sweep
            extra = {}
            if args.seed is not None or args.trajectories is not None:
                extra["runner"] = lambda c: run_ensemble(_overrides(c, args), n_jobs=args.threads)
            outcomes = sweep(args.sweep, out, n_jobs=args.threads, **extra)
            failed = [o for o in outcomes if o.error]
            for o in outcomes:
                log.info("%s: %s", o.name, o.error or o.out_dir)
            return EXIT_NUMERICAL if failed else EXIT_OK

        if args.config:
            config, name = parse_config(args.config).config, args.config.stem
        elif args.manifest:
            config, name = config_from_manifest(args.manifest), args.manifest.parent.name + "-rerun"
        elif args.preset:
            config, name = preset(args.preset), args.preset
        else:
            from .engine import RunConfig

            config, name = RunConfig(), "default"
        config = _overrides(config, args)
        out = args.out or (Path(config.out_dir) if config.out_dir else root / name)

        log.info("running %d trajectories, %d steps -> %s", config.trajectories, config.steps, out)
        result = run_ensemble(config, n_jobs=args.threads)
        write_results(result, out)
        log.info("done in %.1f s", result.metadata["elapsed_s"])
        return EXIT_OK
    except (ConfigError, TypeError, ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalInvariantError as exc:
        print(f"numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
