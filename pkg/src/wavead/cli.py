"""Command-line front end for the detection pipeline."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, DataError, DivergenceError
from .pipeline import (
    stage_calibrate,
    stage_detect,
    stage_evaluate,
    stage_generate,
    stage_run,
    stage_train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavead",
        description=(
            "Anomaly detection for multivariate time series: wavelet feature "
            "images, a convolutional autoencoder, and Q-learning boundary "
            "calibration."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument(
            "--out", type=Path, default=Path("wavead_out"), help="output directory"
        )
        p.add_argument("--seed-data", type=int, default=None, help="override data seed")
        p.add_argument("--seed-train", type=int, default=None, help="override training seed")
        p.add_argument("--seed-rl", type=int, default=None, help="override calibration seed")

    descriptions = {
        "generate": "write the seeded benchmark series and anomaly schedule",
        "train": "train the autoencoder and write a checkpoint",
        "calibrate": "calibrate the decision boundary with the Q-learning agent",
        "detect": "apply a trained checkpoint and boundary to a series",
        "evaluate": "score the held-out windows and write report, curves, figures",
        "run": "generate, train, calibrate, and evaluate in one shot",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc)
        add_common(p)
        if name == "detect":
            p.add_argument(
                "--input", type=Path, default=None, help="series CSV to score"
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed_data is not None:
            config.seeds.data = args.seed_data
        if args.seed_train is not None:
            config.seeds.train = args.seed_train
        if args.seed_rl is not None:
            config.seeds.rl = args.seed_rl

        out_dir = args.out
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "generate":
            artifacts = stage_generate(config, out_dir)
        elif args.command == "train":
            artifacts = stage_train(config, out_dir)
        elif args.command == "calibrate":
            artifacts = stage_calibrate(config, out_dir)
        elif args.command == "detect":
            artifacts = stage_detect(config, out_dir, args.input)
        elif args.command == "evaluate":
            artifacts = stage_evaluate(config, out_dir)
        else:
            artifacts = stage_run(config, out_dir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE

    for name, path in artifacts.items():
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
