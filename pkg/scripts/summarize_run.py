"""Print the loss trajectories and headline metrics of one or more run directories.

    python scripts/summarize_run.py runs/burgers_rom runs/ks_autoencoder
"""

import argparse
import csv
import json
from pathlib import Path


def loss_rows(path, points):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    keep = rows[::max(1, len(rows) // points)]
    if keep[-1] is not rows[-1]:
        keep.append(rows[-1])
    return keep


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("runs", nargs="+")
    p.add_argument("--points", type=int, default=10, help="rows shown per loss curve")
    args = p.parse_args()
    for run in map(Path, args.runs):
        metrics = json.loads((run / "metrics.json").read_text())
        print(f"== {run} ({metrics['experiment']}, seed {metrics['seed']})")
        for mode in ("centralized", "federated"):
            if mode not in metrics:
                continue
            print(f"  {mode}")
            print(f"    {'round':>6} {'train':>11} {'val':>11}")
            for r in loss_rows(run / mode / "rounds.csv", args.points):
                print(f"    {int(r['round']):6d} {float(r['train_loss']):11.3e} "
                      f"{float(r['val_loss']):11.3e}")
            extras = {k: v for k, v in metrics[mode].items() if not k.endswith("_loss")}
            for k, v in sorted(extras.items()):
                print(f"    {k}: {v:.4g}" if isinstance(v, float) else f"    {k}: {v}")
        if "federated_to_centralized_val_loss" in metrics:
            print(f"  federated / centralized final val loss: "
                  f"{metrics['federated_to_centralized_val_loss']:.3f}")


if __name__ == "__main__":
    main()
