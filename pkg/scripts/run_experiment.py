"""Run the full synthetic experiment for both data variants and print the metric tables side by side.

    python3 scripts/run_experiment.py --out-dir runs/exp --seed 0
"""

import argparse
import time
from dataclasses import replace

from stormoutage import pipeline as pl


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="runs/experiment")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--storms", type=int, default=6)
    ap.add_argument("--stratified", action="store_true")
    args = ap.parse_args()

    base = pl.PipelineConfig(out_dir=args.out_dir, seed=args.seed, scene_storms=args.storms,
                             model="both", stratified=args.stratified)
    columns = {}
    for data in ("full", "filtered"):
        cfg = replace(base, data=data, out_dir=f"{args.out_dir}/{data}")
        t0 = time.perf_counter()
        try:
            reports = pl.run_all(cfg)
        except pl.DataError as e:
            print(f"[{data}] skipped: {e}")
            continue
        print(f"[{data}] finished in {time.perf_counter() - t0:.1f} s -> {cfg.out_dir}")
        for name, rep in reports.items():
            columns[f"{name}/{data}"] = rep.to_dict()

    if not columns:
        return
    names = list(columns)
    print("\n" + "metric".ljust(26) + "".join(n.rjust(16) for n in names))
    for label, key in pl.METRIC_ROWS:
        cells = []
        for n in names:
            v = columns[n][key]
            cells.append(("n/a" if v is None else f"{100 * v:.2f}%").rjust(16))
        print(label.ljust(26) + "".join(cells))


if __name__ == "__main__":
    main()
