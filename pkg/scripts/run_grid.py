"""Run a grid spec, optionally pointing it at another dataset or output root.

    python scripts/run_grid.py scripts/grids/table_bce.yaml --dataset path/to/dataset3.csv --jobs 4
"""

import argparse
import json
import sys
from pathlib import Path

from hfqnn import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("spec", type=Path)
    parser.add_argument("--dataset", help="CSV path or 'synthetic'; overrides the grid spec")
    parser.add_argument("--out", help="output root; overrides the grid spec")
    parser.add_argument("--epochs", type=int, help="override epochs, handy for dry runs")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    spec = cli.load_structured(args.spec)
    base = spec.setdefault("base", {})
    for key in ("dataset", "out", "epochs"):
        if getattr(args, key) is not None:
            base[key] = getattr(args, key)
    out_root = Path(base.get("out", "runs/grid"))
    out_root.mkdir(parents=True, exist_ok=True)
    resolved = out_root / "spec.json"
    resolved.write_text(json.dumps(spec, indent=2, sort_keys=True))
    _, code = cli.run_grid(resolved, args.jobs)
    return code


if __name__ == "__main__":
    sys.exit(main())
