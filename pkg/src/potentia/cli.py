"""Command line: ``potentia run|list|plot``.

Exit codes: 0 all gates pass, 1 a tolerance gate failed, 2 the config was
rejected, 3 a numerical-validity gate failed (lost kernel mass or Monte Carlo
horizon bias).  Validity failures take precedence over tolerance failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .plotting import emit_plots
from .report import EXIT_CONFIG, write_report
from .scenarios import BUILTINS, builtin_config, list_scenarios, run_scenario

log = logging.getLogger("potentia")


def _load(target: str):
    path = Path(target)
    if path.suffix in (".yaml", ".yml") or path.exists():
        if not path.exists():
            raise ConfigError(f"no such config file: {target}")
        return load_config(path)
    if target in BUILTINS:
        return builtin_config(target)
    raise ConfigError(f"{target!r} is neither a config file nor a builtin scenario "
                      f"(try `potentia list`)")


def cmd_run(args) -> int:
    try:
        cfg = _load(args.config).with_overrides(args.seed, args.n_paths, args.out, args.workers)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_scenario(cfg)
    out = Path(cfg.output.dir) / cfg.id
    write_report(report, out)
    if not args.no_plots:
        emit_plots(out / "report.csv", out)
    print(report.summary())
    print(f"artifacts in {out}")
    return report.exit_code


def cmd_list(args) -> int:
    for sid, desc in list_scenarios():
        print(f"{sid:28s} {desc}")
    return 0


def cmd_plot(args) -> int:
    paths = emit_plots(args.report, args.out)
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="potentia", description="Renewal, Monte Carlo and asymptotic "
                                "potentials of heavy-tailed risk processes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run a scenario from a YAML file or a builtin id")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--n-paths", type=int)
    r.add_argument("--out", help="output root; artifacts go to <out>/<scenario id>")
    r.add_argument("--workers", type=int, help="threads for Monte Carlo (results do not depend on it)")
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=cmd_run)

    sub.add_parser("list", help="list builtin scenarios").set_defaults(func=cmd_list)

    pl = sub.add_parser("plot", help="draw ratio curves from a report.csv")
    pl.add_argument("report")
    pl.add_argument("--out", help="directory for the SVG files (default: next to the report)")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
