"""Command-line entry point: ``pinaccess --lib cells.lib --out run/``.

Settings come from, in falling priority: command-line flags, a key = value
config file given with ``--config``, the PINACCESS_SEED environment
variable (seed only), and built-in defaults.

Exit status is 0 when no testcell has a violation, 2 when some do, and 1
when the run itself failed.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .pipeline import EXIT_FAILURE, RunConfig, run_pipeline, seed_from_env
from .techlib import LibraryError
from .testgen import METHODS, MODES, STRATEGIES

log = logging.getLogger("pinaccess")


def _on_off(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on or off, got {text!r}")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _seed(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer seed: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pinaccess", description="Stress standard-cell pin access with "
                                "generated testcells routed on two layers and then rule-checked.")
    p.add_argument("--lib", dest="library_path", help="cell library file")
    p.add_argument("--config", help="key = value file with defaults for any long option")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--connectivity", choices=STRATEGIES)
    p.add_argument("--seed", type=_seed, help="64-bit seed (falls back to $PINACCESS_SEED)")
    p.add_argument("--straps", type=_on_off, metavar="{on,off}")
    p.add_argument("--margin-scale", dest="margin_scale", type=_fraction,
                   help="factor applied to the width/spacing/enclosure rules, e.g. 1.25 or 5/4")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--ignore-rule", dest="ignore", action="append", metavar="NAME",
                   help="rule key or report name to suppress; repeatable")
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--incremental", action="store_const", const=True, default=None,
                   help="only rerun testcells whose inputs changed since the last run in --out")
    p.add_argument("--dump-routes", dest="dump_routes", action="store_const", const=True, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_CONVERTERS = {
    "seed": _seed, "straps": _on_off, "margin_scale": _fraction, "workers": int,
    "max_iterations": int, "incremental": _on_off, "dump_routes": _on_off,
    "ignore": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
}


def read_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read_string("[run]\n" + Path(path).read_text())
    known = {f.name for f in fields(RunConfig)}
    aliases = {"lib": "library_path", "out": "out_dir", "ignore_rule": "ignore"}
    out = {}
    for key, value in parser["run"].items():
        name = aliases.get(key.replace("-", "_"), key.replace("-", "_"))
        if name not in known:
            raise ValueError(f"{path}: unknown setting {key!r}")
        try:
            out[name] = _CONVERTERS.get(name, str)(value)
        except argparse.ArgumentTypeError as exc:
            raise ValueError(f"{path}: {key}: {exc}") from None
    return out


def config_from_args(args: argparse.Namespace) -> RunConfig:
    settings = read_config_file(args.config) if args.config else {}
    if "seed" not in settings:
        settings["seed"] = seed_from_env()
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            settings[f.name] = tuple(value) if f.name == "ignore" else value
    if not settings.get("library_path"):
        raise ValueError("no library given (use --lib or set lib in the config file)")
    config = RunConfig(settings.pop("library_path"))
    return replace(config, **settings)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        result = run_pipeline(config)
    except (LibraryError, ValueError, OSError) as exc:
        print(f"pinaccess: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"{len(result.results)} testcells, {sum(1 for r in result.results if r.drc_count)} with "
          f"violations; {result.cells_with_violations} library cells implicated; "
          f"summary in {Path(config.out_dir) / 'summary.txt'}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
