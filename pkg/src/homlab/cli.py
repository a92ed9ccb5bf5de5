"""Command-line entry point.

    homlab <subcommand> [--config path] [--outdir path] [--plots]
                        [--use-cached] [--jobs N]

Subcommands: cell, convergence, carleman, threeball, doubling,
counterexample, calibrate, all.  Exit status: 0 when every acceptance check
of the executed pipelines passes, 1 on a failed check, 2 on configuration
errors, 3 on numerical failures (solver, geometry, assumptions, degenerate
inputs).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, errors, experiments, reporting

SUBCOMMANDS = experiments.PIPELINES + ("all",)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="homlab", description=__doc__)
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", default=None, help="JSON config; defaults are built in")
    p.add_argument("--outdir", default="out", help="report directory")
    p.add_argument("--plots", action="store_true", help="emit SVG line charts")
    p.add_argument("--use-cached", action="store_true",
                   help="reuse <outdir>/constants.json instead of recalibrating")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker threads for sweep stages (reports are "
                        "assembled deterministically regardless)")
    p.add_argument("--version", action="version", version=f"homlab {__version__}")
    return p


def _emit_plots(outdir: Path, result: experiments.StageResult) -> None:
    rows = result.rows
    if result.name == "convergence" and rows:
        eps = [r[0] for r in rows]
        reporting.write_svg_lines(
            outdir / "convergence.svg",
            {"l2": list(zip(eps, (r[2] for r in rows))),
             "h1 two-scale": list(zip(eps, (r[3] for r in rows)))},
            "eps", "error", "recovery errors vs eps", loglog=True)
    elif result.name == "carleman" and rows:
        series = {}
        for case, lam, tau, *_rest, ratio, _m in rows:
            series.setdefault(f"{case} lam={lam}", []).append((tau, ratio))
        reporting.write_svg_lines(outdir / "carleman.svg", series, "tau",
                                  "lhs/rhs", "weighted-inequality ratios",
                                  loglog=True)
    elif result.name == "threeball" and rows:
        series = {}
        for kind, eps, radius, value in rows:
            if kind == "multiscale":
                series.setdefault("multiscale (vs r)", []).append((radius, value))
            else:
                series.setdefault(kind, []).append((eps, value))
        reporting.write_svg_lines(outdir / "threeball.svg", series,
                                  "eps (or r)", "empirical constant",
                                  "three-ball constants", loglog=True)
    elif result.name == "doubling" and rows:
        series = {}
        for eps, radius, ratio, *_ in rows:
            series.setdefault(f"eps={eps}", []).append((radius, ratio))
        reporting.write_svg_lines(outdir / "doubling.svg", series, "r", "N(r)",
                                  "doubling ratios", loglog=True)
    elif result.name == "counterexample" and rows:
        pts = [(r[0] + 1, r[1]) for r in rows]
        exact = [(r[0] + 1, r[2]) for r in rows]
        reporting.write_svg_lines(outdir / "counterexample.svg",
                                  {"quadrature": pts, "exact": exact},
                                  "degree + 1", "inner/outer mass ratio",
                                  "counterexample mass decay", loglog=True)


def run(subcommand: str, config_path: str | None, outdir: str = "out",
        plots: bool = False, use_cached: bool = False, jobs: int = 1) -> int:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        cfg = experiments.load_config(config_path)
    except errors.ConfigurationError as exc:
        print(f"homlab: configuration error: {exc}", file=sys.stderr)
        return 2

    constants_file = out / "constants.json" if use_cached else None
    runner = experiments.Runner(cfg, use_cached_constants=constants_file,
                                jobs=jobs)

    pipelines = {}
    overall = True
    try:
        for result, wall in experiments.run_stages(runner, subcommand):
            reporting.write_csv(out / f"{result.name}.csv", result.columns,
                                result.rows, result.name)
            if plots:
                _emit_plots(out, result)
            entry = {"pass": result.passed, "wall_clock_s": wall,
                     "checks": result.checks}
            entry.update(result.data)
            pipelines[result.name] = entry
            overall = overall and result.passed
            status = "pass" if result.passed else "FAIL"
            print(f"homlab: {result.name}: {status} ({wall:.1f}s)")
            for name, ok in result.checks.items():
                if not ok:
                    print(f"homlab:   failed check: {name}")
    except errors.ConfigurationError as exc:
        print(f"homlab: configuration error: {exc}", file=sys.stderr)
        return 2
    except errors.HomlabError as exc:
        print(f"homlab: numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3

    summary = {
        "version": __version__,
        "subcommand": subcommand,
        "config": cfg,
        "pipelines": pipelines,
        "overall_pass": overall,
    }
    if runner.constants is not None:
        summary["constants"] = experiments.constants_dict(runner.constants)
        (out / "constants.json").write_text(
            json.dumps(summary["constants"], indent=2, sort_keys=True) + "\n")
    reporting.write_summary(out / "summary.json", summary)
    return 0 if overall else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.subcommand, args.config, args.outdir, args.plots,
               args.use_cached, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
