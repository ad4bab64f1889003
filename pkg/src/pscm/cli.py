"""Command-line entry point: ``describe``, ``tables``, ``sweep``, ``compare``."""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .ess import probability_table
from .sim import ExperimentConfig, Link, run_sweep, shaping_gain, summarize, read_results, write_results

TABLE1_K = (40, 80, 120, 160, 200, 240, 256)
TABLE2_K = (300, 400, 500, 600, 700, 800, 900, 1000, 1024)


def _load_config(args) -> ExperimentConfig:
    d = {}
    if args.config:
        with open(args.config) as fh:
            d = json.load(fh)
    for key in ("seed", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    return ExperimentConfig.from_dict(d)


def format_table(order: int, n_bits: int, k_values) -> str:
    rows = probability_table(order, n_bits, k_values)
    n_lev = len(rows[0][1])
    bits = int(np.log2(n_lev)) if n_lev > 1 else 1
    head = "k_sh " + " ".join(f"p({j:0{bits}b})" for j in range(n_lev))
    lines = [f"# QAM-{order} n_sh={n_bits} amplitude bits", head]
    for k, p in rows:
        lines.append(f"{k:4d} " + " ".join(f"{v:.4f}" for v in p))
    return "\n".join(lines) + "\n"


def cmd_describe(args) -> int:
    link = Link(_load_config(args))
    sys.stdout.write(link.describe())
    return 0


def cmd_tables(args) -> int:
    t0 = time.perf_counter()
    if args.table in ("1", "all"):
        sys.stdout.write(format_table(16, 256, TABLE1_K))
    if args.table in ("2", "all"):
        sys.stdout.write(format_table(64, 1024, TABLE2_K))
    print(f"# elapsed {time.perf_counter() - t0:.3f} s")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    res = run_sweep(cfg)
    out = args.out or "results.csv"
    write_results(res.records, out, cfg, res.summary())
    for r in res.records:
        print(f"{r.ebno_db:7.3f} dB  trials={r.trials:6d}  errors={r.block_errors:4d}  "
              f"bler={r.bler:.4g}  ci=[{r.ci_lo:.4g}, {r.ci_hi:.4g}]")
    x = res.crossing
    print("10% BLER crossing: " + (f"{x:.3f} dB" if x is not None else "unavailable"))
    print(f"wrote {out}")
    return 0


def _load_result(csv_path):
    side = csv_path.rsplit(".", 1)[0] + ".json"
    with open(side) as fh:
        meta = json.load(fh)
    cfg = ExperimentConfig.from_dict(meta["config"])
    rate = meta["summary"]["rate"] if meta.get("summary") else Link(cfg).rate
    return summarize(cfg, rate, read_results(csv_path))


def cmd_compare(args) -> int:
    g = shaping_gain(_load_result(args.shaped), _load_result(args.baseline))
    print(json.dumps(g, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pscm", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)

    d = sub.add_parser("describe", help="print layout, rates and probabilities")
    common(d)
    d.set_defaults(func=cmd_describe)

    t = sub.add_parser("tables", help="amplitude probability tables")
    t.add_argument("--table", choices=("1", "2", "all"), default="all")
    t.set_defaults(func=cmd_tables)

    s = sub.add_parser("sweep", help="run an Eb/N0 sweep")
    common(s)
    s.add_argument("--out", help="CSV path (JSON sidecar written next to it)")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("compare", help="gain at 10%% BLER between two sweeps")
    c.add_argument("shaped")
    c.add_argument("baseline")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"pscm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
