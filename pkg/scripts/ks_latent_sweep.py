"""Test error of the KS autoencoder as a function of the latent dimension.

    python scripts/ks_latent_sweep.py configs/ks_autoencoder.toml --R 2 4 6 8 10 12 --epochs 300

Writes ``latent_sweep.csv`` (R, mode, test MSE, final validation loss) into
the output directory. The KS trajectory is cached as in ``fedrom run``.
"""

import argparse
import csv
import dataclasses
import json
import logging
from pathlib import Path

from fedrom.config import load_config
from fedrom.experiments import run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--R", type=int, nargs="+", default=[2, 4, 6, 8, 10, 12])
    p.add_argument("--epochs", type=int, default=300, help="rounds and centralized epochs")
    p.add_argument("--mode", default="centralized", choices=["centralized", "federated", "both"])
    p.add_argument("--out", default="runs/ks_latent_sweep")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    base = load_config(args.config)
    out = Path(args.out)
    rows = []
    for R in args.R:
        cfg = dataclasses.replace(
            base, mode=args.mode, output=str(out / f"R{R:02d}"),
            fed=dataclasses.replace(base.fed, rounds=args.epochs),
            centralized=dataclasses.replace(base.centralized, epochs=args.epochs),
            model=dataclasses.replace(base.model, R=R))
        run_experiment(cfg)
        m = json.loads((Path(cfg.output) / "metrics.json").read_text())
        for mode in cfg.modes:
            rows.append([R, mode, m[mode]["test_mse_normalized"], m[mode]["final_val_loss"]])
            print(f"R={R:2d} {mode:11s} test MSE {rows[-1][2]:.3e}")

    with open(out / "latent_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["R", "mode", "test_mse_normalized", "final_val_loss"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
