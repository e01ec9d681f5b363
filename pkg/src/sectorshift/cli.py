"""Command-line entry point: ``shifts``, ``network``, ``sample`` and ``validate``.

Exit status is 0 on success, 1 for bad input and 2 when a computation fails.
Every run writes ``manifest.json`` next to its outputs.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, network, sampling, shifts
from .data import MissingPolicy, load_prices, load_sector_map, sector_returns
from .errors import ComputationError, InputError

log = logging.getLogger("sectorshift")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(x: float) -> str:
    return "" if x is None or np.isnan(x) else f"{x:.6g}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load(args, need_sectors=True):
    policy = MissingPolicy.parse(args.missing_policy)
    panel = load_prices(args.prices, policy)
    smap = None
    if need_sectors or args.sectors:
        if not args.sectors:
            raise InputError("--sectors is required for this subcommand")
        smap = load_sector_map(args.sectors, panel)
    return panel, smap


def _resolve(args, default: str) -> Path:
    out = Path(args.out or default)
    return out if out.is_absolute() else Path(args.out_dir) / out


def cmd_shifts(args) -> list[Path]:
    panel, smap = _load(args)
    returns = sector_returns(panel, smap)
    cfg = shifts.WindowConfig(args.tau)
    series = shifts.compute(returns, args.measure, cfg, args.threads)
    series = shifts.annotate_threshold(series, args.threshold_pct)
    out = _resolve(args, f"shifts_{args.measure}.csv")
    mask = series.breach_mask()
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["date", "t", "value"] + (["pvalue"] if series.pvalues is not None else []) + ["breach"]
        w.writerow(head)
        for k, t in enumerate(series.t_index):
            row = [series.dates[k].isoformat(), int(t), _fmt(series.values[k])]
            if series.pvalues is not None:
                row.append(_fmt(series.pvalues[k]))
            row.append(int(mask[k]))
            w.writerow(row)
    log.info("%s: %d values, threshold %s, %d breaches",
             series.name, len(series), _fmt(series.threshold), len(series.breaches))
    return [out]


def cmd_network(args) -> list[Path]:
    panel, smap = _load(args)
    corr = network.full_correlation(sector_returns(panel, smap))
    tree = network.sector_mst(corr, args.weights)
    ext = "dot" if args.format == "dot" else "csv"
    out = _resolve(args, f"mst_{args.weights}.{ext}")
    network.export_graph(tree, out, args.format)
    deg = tree.degrees()
    hub = int(np.argmax(deg))
    log.info("%s MST: total weight %.6f, max degree %d (%s)",
             args.weights, tree.total_weight, deg[hub], tree.nodes[hub])
    return [out]


def _spec(args, style=None) -> sampling.SampleSpaceSpec:
    return sampling.SampleSpaceSpec(
        style=style or args.style,
        size=args.size,
        scheme=args.scheme,
        draws=args.draws,
        seed=args.seed,
        period=sampling.parse_period(args.period),
        longshort_space=args.longshort_space,
        top_fraction=args.top_fraction,
    )


def cmd_sample(args) -> list[Path]:
    panel, smap = _load(args)
    spec = _spec(args)
    report = sampling.run_experiment(spec, panel, smap, args.threads, args.sign_split)
    for other in args.compare or []:
        rival = sampling.run_experiment(_spec(args, other), panel, smap, args.threads)
        report.comparisons[other] = sampling.compare_spaces(report.sharpe, rival.sharpe)
    out = _resolve(args, f"sample_{args.style}.json")
    if out.suffix == ".csv":
        return _write_sample_csv(report, out)
    out.write_text(report.to_json())
    return [out]


def _write_sample_csv(report, out: Path) -> list[Path]:
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "sharpe"])
        for q, v in report.quantiles.items():
            w.writerow([f"{q:.2f}", _fmt(v)])
        for other, p in report.comparisons.items():
            w.writerow([f"P(>{other})", _fmt(p)])
    comp = out.with_name(out.stem + "_composition.csv")
    keys = list(report.composition[0])
    with comp.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for row in report.composition:
            w.writerow([row["sector"]] + [_fmt(row[k]) for k in keys[1:]])
    return [out, comp]


def cmd_validate(args) -> list[Path]:
    panel, smap = _load(args, need_sectors=False)
    summary = {
        "dates": len(panel.dates),
        "T": panel.T,
        "N": panel.N,
        "first_date": panel.dates[0].isoformat(),
        "last_date": panel.dates[-1].isoformat(),
        "missing_policy": str(MissingPolicy.parse(args.missing_policy)),
        "audit": panel.audit,
    }
    if smap is not None:
        summary["n"] = smap.n
        summary["sector_sizes"] = dict(zip(smap.sectors, smap.sizes))
        tau = args.tau
        summary["series_length"] = max(panel.T - 2 * tau + 1, 0)
    out = _resolve(args, "validate.json")
    out.write_text(json.dumps(summary, indent=2) + "\n")
    print(f"ok: {panel.T + 1} dates x {panel.N} tickers"
          + (f" in {smap.n} sectors" if smap is not None else ""))
    return [out]


def _write_manifest(args, outputs: list[Path]) -> None:
    skip = {"func", "threads", "log_level", "out_dir"}
    config = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    inputs = {}
    for key in ("prices", "sectors"):
        if getattr(args, key, None):
            inputs[key] = {"path": getattr(args, key), "sha256": _sha256(Path(getattr(args, key)))}
    manifest = {
        "command": args.command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": inputs,
        "outputs": {p.name: _sha256(p) for p in outputs},
        "version": __version__,
    }
    path = Path(args.out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def replay_argv(manifest: dict, out_dir) -> list[str]:
    """Command line that regenerates a manifest's outputs into ``out_dir``."""
    config = dict(manifest["config"])
    argv = [config.pop("command"), "--out-dir", str(out_dir)]
    for key, value in config.items():
        flag = "--" + key.replace("_", "-")
        if value is None or value is False:
            continue
        if value is True:
            argv.append(flag)
        elif isinstance(value, list):
            for v in value:
                argv += [flag, str(v)]
        else:
            argv += [flag, str(value)]
    return argv


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--prices", required=True, help="price CSV (date,<ticker>,...)")
    g.add_argument("--sectors", help="sector CSV (ticker,sector)")
    g.add_argument("--out-dir", default=".", help="directory for outputs and manifest.json")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--log-level", default="WARNING",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    g.add_argument("--missing-policy", default="forward-fill:5",
                   help="forward-fill:<maxgap> or drop (default forward-fill:5)")
    g.add_argument("--out", help="output file (relative paths land in --out-dir)")

    parser = _Parser(prog="sectorshift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("shifts", parents=[common], help="rolling market-shift series")
    p.add_argument("--measure", choices=shifts.MEASURES, default="s")
    p.add_argument("--tau", type=int, default=30)
    p.add_argument("--threshold-pct", type=float, default=0.05)
    p.set_defaults(func=cmd_shifts)

    p = sub.add_parser("network", parents=[common], help="sector minimum spanning tree")
    p.add_argument("--weights", choices=network.WEIGHTINGS, default="distance")
    p.add_argument("--format", choices=["dot", "csv"], default="dot")
    p.set_defaults(func=cmd_network)

    p = sub.add_parser("sample", parents=[common], help="portfolio sampling experiment")
    p.add_argument("--style", choices=sampling.STYLES, default="long")
    p.add_argument("--size", type=int, default=30)
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--scheme", choices=sampling.SCHEMES, default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--period", default="full", help="start:end, gfc or full")
    p.add_argument("--top-fraction", type=float, default=0.01)
    p.add_argument("--longshort-space", choices=sampling.LONGSHORT_SPACES, default="product")
    p.add_argument("--compare", action="append", choices=sampling.STYLES,
                   help="also sample this style and report P(this style > it); repeatable")
    p.add_argument("--sign-split", action="store_true",
                   help="split composition into long and short positions")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("validate", parents=[common], help="lint a price panel and sector map")
    p.add_argument("--tau", type=int, default=30)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise InputError("--threads must be at least 1")
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs = args.func(args)
        _write_manifest(args, outputs)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ComputationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
