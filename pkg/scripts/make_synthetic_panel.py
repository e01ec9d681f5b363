"""Write a synthetic price panel and sector map as CSV.

    python scripts/make_synthetic_panel.py --out-dir data --assets 268 --sectors 60 --days 4780
"""
import argparse
from pathlib import Path

from sectorshift import data, synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--assets", type=int, default=268)
    ap.add_argument("--sectors", type=int, default=60)
    ap.add_argument("--days", type=int, default=4780, help="number of returns (prices has one more row)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sizes = synthetic.spread_sizes(args.assets, args.sectors)
    panel, smap = synthetic.make_panel(T=args.days, sizes=sizes, seed=args.seed)
    data.write_prices(out / "prices.csv", panel)
    data.write_sector_map(out / "sectors.csv", smap)
    print(f"wrote {out / 'prices.csv'} ({panel.T + 1} dates x {panel.N} tickers) and {out / 'sectors.csv'}")


if __name__ == "__main__":
    main()
