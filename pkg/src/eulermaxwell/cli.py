"""Command-line scenario runner.

    eulermaxwell --config run.ini [--out DIR] [--override section.key=value ...]
    eulermaxwell --list-scenarios

Exit status is 0 when every check of the scenario passes, 2 when a check
fails and 1 on configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import re
import sys
import time

from . import scenarios as sc

log = logging.getLogger("eulermaxwell")

EXIT_OK, EXIT_ERROR, EXIT_CHECK = 0, 1, 2


def _line_numbers(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    out = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), i)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip()), i)
    return out


def load_config(path, overrides=()) -> sc.ScenarioConfig:
    """Read an INI file, apply ``section.key=value`` overrides and validate."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise sc.ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys such as T and L are case sensitive
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise sc.ConfigError(f"malformed config: {exc}") from None
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    lines = _line_numbers(text)
    for item in overrides:
        m = re.fullmatch(r"([A-Za-z_]+)\.([A-Za-z_0-9]+)=(.*)", item)
        if not m:
            raise sc.ConfigError(f"override {item!r} is not of the form section.key=value")
        raw.setdefault(m.group(1), {})[m.group(2)] = m.group(3)
        lines[(m.group(1), m.group(2))] = "--override"
    return sc.validate(raw, lines)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eulermaxwell", description="Run a named Euler-Maxwell scenario.")
    ap.add_argument("--config", help="INI configuration file")
    ap.add_argument("--out", default="./out", help="output directory (default ./out)")
    ap.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="replace one configuration value; repeatable")
    ap.add_argument("--list-scenarios", action="store_true", help="print the scenario names and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.list_scenarios:
        for name in sc.SCENARIOS:
            print(f"{name:22s} {sc.DESCRIPTIONS[name]}")
        return EXIT_OK
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_ERROR
    try:
        cfg = load_config(args.config, args.override)
    except sc.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    start = time.perf_counter()
    try:
        result = sc.run_scenario(cfg, args.out)
    except (RuntimeError, ValueError, FloatingPointError, OSError) as exc:
        print(f"error: {cfg.name}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    log.info("%s finished in %.1f s", cfg.name, time.perf_counter() - start)
    for key, chk in result.checks.items():
        print(f"{'PASS' if chk.passed else 'FAIL'}  {key}: {chk.value} (threshold {chk.threshold})")
    print(f"{cfg.name}: {'passed' if result.passed else 'FAILED'}; summary in {args.out}/summary.json")
    return EXIT_OK if result.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
