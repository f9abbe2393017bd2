#!/usr/bin/env python3
"""Sweep the blend transition length Q on the spiral task.

One vcon run per (Q, seed); per-epoch validation accuracies land in a
merged sweep.csv with columns q,seed,epoch,val_accuracy so the
accuracy-vs-Q trajectories can be plotted directly.
"""

import argparse
import json
import sys
from pathlib import Path

from vconlab.cli import main


def build_config(args) -> dict:
    return {
        "model": {"layer_sizes": [2, 64, 64, 3], "activation": "relu"},
        "dataset": {
            "kind": "spiral",
            "classes": 3,
            "samples_per_class": 500,
            "noise": 0.2,
            "seed": args.data_seed,
        },
        "compression": {"kind": "prune_layer", "sparsity": args.sparsity},
        "optimizer": {"kind": "adam", "lr": args.lr},
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "seeds": list(range(args.seeds)),
        "q_epochs": args.q_epochs,
        "output_dir": str(args.output),
    }


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--output", type=Path, default=Path("runs/q_sweep"))
    p.add_argument("--q-epochs", type=int, nargs="+", default=[2, 12, 25],
                   help="transition lengths to sweep, in epochs")
    p.add_argument("--sparsity", type=float, default=0.95)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (0..N-1)")
    p.add_argument("--data-seed", type=int, default=0)
    return p.parse_args(argv)


if __name__ == "__main__":
    args = parse_args()
    if len(args.q_epochs) < 2:
        sys.exit("need at least 2 q values to sweep")
    args.output.mkdir(parents=True, exist_ok=True)
    config_path = args.output / "config.json"
    config_path.write_text(json.dumps(build_config(args), indent=2))
    sys.exit(main(["sweep-q", "--config", str(config_path)]))
