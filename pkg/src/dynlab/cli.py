"""Command line entry point: dynlab <subcommand> --config <path> [--out <dir>] [--seed <u64>]."""

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from dynlab import __version__
from dynlab.config import ConfigError, load_config
from dynlab.pipelines import PIPELINES


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="dynlab", description="Run one acceptance pipeline and write its artifacts.")
    p.add_argument("--version", action="version", version=f"dynlab {__version__}")
    p.add_argument("subcommand", choices=sorted(PIPELINES))
    p.add_argument("--config", required=True, help="TOML experiment configuration")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=_u64, help="seed (overrides the config)")
    p.add_argument("--no-plots", action="store_true", help="skip SVG output")
    return p


def jsonable(obj):
    """Plain JSON types; non-finite floats become strings so the output is strict JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_plots(directory, plots):
    if not plots:
        return
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "dynlab"
    plt.rcParams["svg.fonttype"] = "none"
    directory.mkdir(parents=True, exist_ok=True)
    for plot in plots:
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, (x, y) in plot.series.items():
            ax.plot(x, y, label=label)
        ax.set_xlabel(plot.xlabel)
        ax.set_ylabel(plot.ylabel)
        ax.legend()
        fig.savefig(directory / f"{plot.name}.svg", format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)


def run(subcommand, cfg, write_plots_=True):
    """Run a pipeline and write summary.json, samples.csv and plots; returns the summary dict."""
    t0 = time.perf_counter()
    stage = PIPELINES[subcommand](cfg)
    wall = time.perf_counter() - t0
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "subcommand": subcommand,
        "version": __version__,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "reports": stage.reports,
        "ledger": [c.to_dict() for c in stage.checks],
        "pass": stage.passed,
        "wall_clock": wall,
    }
    summary = jsonable(summary)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_csv(out / "samples.csv", stage.header, stage.rows)
    if write_plots_:
        write_plots(out / "plots", stage.plots)
    return summary


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, output=args.out)
    except (OSError, ConfigError) as exc:
        parser.error(str(exc))
    summary = run(args.subcommand, cfg, not args.no_plots)
    for entry in summary["ledger"]:
        print(f"{'PASS' if entry['pass'] else 'FAIL'}  {entry['name']}: {entry['value']}")
    print(f"{args.subcommand}: {'PASS' if summary['pass'] else 'FAIL'} -> {cfg.output}")
    return 0 if summary["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
