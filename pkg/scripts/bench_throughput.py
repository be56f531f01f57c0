"""Scoring throughput of both classifiers on a large synthetic feature table."""

import argparse
import time

import numpy as np

from stormoutage.forest import RfcHyperparams, fit_forest
from stormoutage.mlp import MlpConfig, MlpModel, train_mlp
from stormoutage.pipeline import predict_rows
from stormoutage.smote import SmoteConfig, smote_oversample
from stormoutage.synthetic import generate_labeled_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=221_506)
    ap.add_argument("--train-rows", type=int, default=4000)
    ap.add_argument("--trees", type=int, default=200)
    ap.add_argument("--n-jobs", type=int, default=1)
    args = ap.parse_args()

    ds = generate_labeled_table(args.train_rows, seed=0)
    bal = smote_oversample(np.where(ds.missing, 0.0, ds.X), ds.y, SmoteConfig(seed=0))
    print(f"training set after oversampling: {len(bal.y)} rows")

    t0 = time.perf_counter()
    rfc = fit_forest(bal.X, bal.y, RfcHyperparams(n_trees=args.trees), n_jobs=args.n_jobs)
    print(f"forest fit: {time.perf_counter() - t0:.1f} s")
    mcfg = MlpConfig(epochs=50)
    t0 = time.perf_counter()
    params, _ = train_mlp(bal.X, bal.y, mcfg)
    print(f"mlp fit (50 epochs): {time.perf_counter() - t0:.1f} s")
    mlp = MlpModel(mcfg, params)

    big = generate_labeled_table(args.rows, seed=1)
    X = np.where(big.missing, 0.0, big.X)
    for name, model in (("rfc", rfc), ("mlp", mlp)):
        t0 = time.perf_counter()
        predict_rows(model, X)
        dt = time.perf_counter() - t0
        print(f"{name}: {len(X)} rows in {dt:.2f} s ({len(X) / dt:,.0f} rows/s)")


if __name__ == "__main__":
    main()
