"""Command line: run, validate, list-presets, plot.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from fibermi.experiments import plotting, runner
from fibermi.experiments.spec import ConfigError, load_preset, load_spec, preset_names

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("fibermi")


def _cmd_run(args) -> int:
    spec = load_spec(args.spec)
    if args.n_override is not None:
        spec = spec.with_n(args.n_override)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        spec = spec.replace(seed=args.seed)
    if args.workers is not None and args.workers < 1:
        raise ConfigError("workers", "must be >= 1")
    out = Path(args.out_dir)
    csv_path = out / spec.outputs.get("csv", f"{spec.name}.csv")
    svg_path = out / spec.outputs.get("svg", f"{spec.name}.svg")
    t0 = time.perf_counter()
    rows = runner.run(spec, args.workers)
    runner.write_csv(rows, csv_path)
    plotting.render_plot(rows, plotting.default_plot_config(spec), svg_path)
    failed = sum(r.status != "ok" for r in rows)
    print(f"{spec.name}: {len(rows)} rows ({failed} failed) in {time.perf_counter() - t0:.1f} s")
    print(f"wrote {csv_path}")
    print(f"wrote {svg_path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    spec = load_spec(args.spec)
    print(f"ok: {spec.name} ({spec.preset}), {len(spec.sweep.values)} points x "
          f"{len(spec.inputs)} input(s) x {len(spec.estimators)} estimator(s), N={spec.n}")
    return EXIT_OK


def _cmd_list(args) -> int:
    for name in preset_names():
        spec = load_preset(name)
        print(f"{name:18s} {spec.preset:16s} N={spec.n:<7d} {spec.description}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    try:
        cfg = json.loads(Path(args.plot).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("plot", f"no such file: {args.plot}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("plot", str(exc)) from None
    if not isinstance(cfg, dict):
        raise ConfigError("plot", "plot config must be a JSON object")
    try:
        rows = runner.read_csv(args.results)
    except FileNotFoundError:
        raise ConfigError("results", f"no such file: {args.results}") from None
    except ValueError as exc:
        raise ConfigError("results", str(exc)) from None
    out = cfg.get("output") or str(Path(args.results).with_suffix(".svg"))
    try:
        plotting.render_plot(rows, cfg, out)
    except ValueError as exc:
        raise ConfigError("plot", str(exc)) from None
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fibermi", description="Mutual-information estimation experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment spec (file or bundled preset name)")
    r.add_argument("spec")
    r.add_argument("--n-override", type=int, default=None, help="samples per point")
    r.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    r.add_argument("--out-dir", default=".", help="directory for the CSV and SVG outputs")
    r.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    r.set_defaults(func=_cmd_run)

    sub.add_parser("list-presets", help="list bundled presets").set_defaults(func=_cmd_list)

    v = sub.add_parser("validate", help="check a spec without running it")
    v.add_argument("spec")
    v.set_defaults(func=_cmd_validate)

    p = sub.add_parser("plot", help="render a results CSV to SVG")
    p.add_argument("results")
    p.add_argument("plot")
    p.set_defaults(func=_cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
