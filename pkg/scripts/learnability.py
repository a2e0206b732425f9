"""Train FNN and H-FQNN on the seeded separable set and print validation accuracy per epoch.

    python scripts/learnability.py --epochs 150 --every 10
"""

import argparse
import time

from hfqnn import data, nn


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--epochs", type=int, default=150)
    parser.add_argument("--lr", type=float, default=0.02)
    parser.add_argument("--qubits", type=int, default=6)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--every", type=int, default=10, help="print every N epochs")
    parser.add_argument("--models", nargs="+", default=["fnn", "hfqnn"])
    args = parser.parse_args()

    split = data.split_70_20_10(data.make_separable(600, 2, 4, seed=args.seed), seed=args.seed)
    scaler = data.fit_standardizer(split.train)
    train, val = scaler.transform(split.train), scaler.transform(split.val)
    for model in args.models:
        spec = nn.ModelSpec(model, train.n_features, args.qubits)
        start = time.perf_counter()
        result = nn.train(spec, nn.TrainConfig(args.epochs, args.lr, 64, "bce", args.seed), train, val)
        elapsed = time.perf_counter() - start
        for h in result.history:
            if h["epoch"] % args.every == 0 or h["epoch"] == 1:
                print(f"{model:6s} epoch {h['epoch']:4d}  loss {h['train_loss']:.4f}  val acc {h['val_accuracy']:.3f}")
        print(f"{model:6s} done in {elapsed:.1f}s, final val acc {result.history[-1]['val_accuracy']:.3f}\n")


if __name__ == "__main__":
    main()
