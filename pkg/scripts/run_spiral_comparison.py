#!/usr/bin/env python3
"""Paired comparison on the 3-class spiral: STE baseline vs scheduled blending.

Writes baseline/ and vcon/ run artifacts plus compare.json under --output.
Defaults reproduce the acceptance-gate experiment (0.95 layer-wise
sparsity, Q = 12 epochs, 5 seeds).
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
        "compression": {"kind": args.compression, "sparsity": args.sparsity}
        if args.compression.startswith("prune")
        else {"kind": args.compression},
        "optimizer": {"kind": "adam", "lr": args.lr},
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "seeds": list(range(args.seeds)),
        "q_epochs": args.q_epochs,
        "output_dir": str(args.output),
    }


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--output", type=Path, default=Path("runs/spiral_comparison"))
    p.add_argument("--compression", default="prune_layer",
                   choices=["prune_layer", "prune_global", "prune_structured", "binary"])
    p.add_argument("--sparsity", type=float, default=0.95)
    p.add_argument("--q-epochs", type=int, default=12)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (0..N-1)")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--baseline", default="ste_standard", choices=["ste_standard", "post_shot"])
    return p.parse_args(argv)


if __name__ == "__main__":
    args = parse_args()
    args.output.mkdir(parents=True, exist_ok=True)
    config_path = args.output / "config.json"
    config_path.write_text(json.dumps(build_config(args), indent=2))
    sys.exit(main(["compare", "--config", str(config_path), "--baseline", args.baseline]))
