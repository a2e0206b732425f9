"""Write a synthetic ADS-B style CSV with drift and merge attacks.

Useful for exercising the CSV code path without the real dataset.

    python scripts/make_synthetic_csv.py runs/synthetic.csv --normal 4000 --attack 2000
"""

import argparse
from pathlib import Path

from hfqnn import data


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("path", type=Path)
    parser.add_argument("--normal", type=int, default=4000)
    parser.add_argument("--attack", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    args.path.parent.mkdir(parents=True, exist_ok=True)
    records = data.generate_synthetic(args.normal, args.attack, seed=args.seed)
    data.write_csv(records, args.path)
    print(f"wrote {len(records)} rows to {args.path}")


if __name__ == "__main__":
    main()
