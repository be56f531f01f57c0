"""Command-line entry point: ``stormoutage <stage> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline as pl
from .synthetic import ConfigError

log = logging.getLogger("stormoutage")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_MODEL = 0, 2, 3, 4

STAGES = {
    "generate": pl.run_generate,
    "detect": pl.run_detect,
    "track": pl.run_track,
    "featurize": pl.run_featurize,
    "train": pl.run_train,
    "evaluate": pl.run_evaluate,
    "predict": pl.run_predict,
    "all": pl.run_all,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stormoutage", description=__doc__)
    ap.add_argument("stage", choices=sorted(STAGES))
    ap.add_argument("--config", help="JSON file with PipelineConfig fields")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out-dir")
    ap.add_argument("--frames-dir")
    ap.add_argument("--radius-km", type=float)
    ap.add_argument("--min-area-km2", type=float)
    ap.add_argument("--threshold-dbz", type=float)
    ap.add_argument("--model", choices=["rfc", "mlp", "both"])
    ap.add_argument("--data", choices=["full", "filtered"])
    ap.add_argument("--stratified", action="store_true", default=None, help="stratify the train/validation split")
    ap.add_argument("--rfc-params", dest="rfc_params_file", help="JSON with random forest hyperparameters")
    ap.add_argument("--mlp-params", dest="mlp_params_file", help="JSON with network hyperparameters")
    ap.add_argument("--random-search", dest="random_search_iter", type=int,
                    help="random-search iterations for forest hyperparameters")
    ap.add_argument("--f1-formula", choices=["standard", "printed"],
                    help="macro F1 variant; 'printed' omits the factor 2")
    ap.add_argument("--n-jobs", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args) -> pl.PipelineConfig:
    cfg = pl.PipelineConfig.load(args.config) if args.config else pl.PipelineConfig()
    for name in ("seed", "out_dir", "frames_dir", "radius_km", "min_area_km2", "threshold_dbz", "model", "data",
                 "stratified", "rfc_params_file", "mlp_params_file", "random_search_iter", "f1_formula", "n_jobs"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        STAGES[args.stage](cfg)
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except pl.DataError as e:
        log.error("data error: %s", e)
        return EXIT_DATA
    except pl.ModelError as e:
        log.error("model error: %s", e)
        return EXIT_MODEL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
