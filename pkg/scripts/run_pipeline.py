"""Run every analysis on one panel: all shift series, both trees, and the
sampling experiments over the full sample and the 2007-09 crisis window.

    python scripts/run_pipeline.py data/prices.csv data/sectors.csv --out-dir results
"""
import argparse
import json
import shutil
import sys
import time
from pathlib import Path

from sectorshift import cli, network, sampling, shifts


def runs(draws, seed):
    for m in shifts.MEASURES:
        yield f"shifts_{m}", ["shifts", "--measure", m]
    for w in network.WEIGHTINGS:
        yield f"mst_{w}", ["network", "--weights", w]
    for period in ("full", "gfc"):
        for style in sampling.STYLES:
            others = [s for s in sampling.STYLES if s != style]
            argv = ["sample", "--style", style, "--period", period, "--draws", draws, "--seed", seed,
                    "--out", f"sample_{style}_{period}.json"]
            for o in others:
                argv += ["--compare", o]
            if style == "longshort":
                argv.append("--sign-split")
            yield f"sample_{style}_{period}", argv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("prices")
    ap.add_argument("sectors")
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--draws", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out_dir)
    manifests = out / "manifests"
    manifests.mkdir(parents=True, exist_ok=True)
    common = ["--prices", args.prices, "--sectors", args.sectors, "--out-dir", out, "--threads", args.threads]
    for name, argv in runs(args.draws, args.seed):
        start = time.perf_counter()
        code = cli.main([str(a) for a in argv + common])
        if code != 0:
            sys.exit(f"{name} failed with exit status {code}")
        shutil.move(out / "manifest.json", manifests / f"{name}.json")
        print(f"{name:28s} {time.perf_counter() - start:6.1f}s")

    for period in ("full", "gfc"):
        print(f"\nSharpe quantiles ({period})")
        for style in sampling.STYLES:
            doc = json.loads((out / f"sample_{style}_{period}.json").read_text())
            q = doc["quantiles"]
            cmp = ", ".join(f"P(>{k})={v:.3f}" for k, v in doc["comparisons"].items())
            print(f"  {style:9s} q01={q['0.01']:+.3f} q50={q['0.50']:+.3f} q99={q['0.99']:+.3f}  {cmp}")


if __name__ == "__main__":
    main()
