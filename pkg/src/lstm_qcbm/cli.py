"""Command-line entry point.

    lstm-qcbm synth    --config cfg.json --seed 7 --out data/
    lstm-qcbm train    --config cfg.json --mode hybrid --out runs/hybrid
    lstm-qcbm evaluate runs/baseline runs/hybrid --out results/
    lstm-qcbm report   runs/baseline runs/hybrid --out figures/

Exit codes: 0 success, 1 usage or configuration error, 2 data error or
missing file, 3 numerical failure during training.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiment
from .errors import ConfigurationError, DataError, NumericalError
from .gfopt import InputError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("lstm_qcbm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration (all keys optional)")
    p.add_argument("--seed", type=int, help="global seed, overrides the config")
    p.add_argument("--out", type=Path, help="output directory, overrides the config")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lstm-qcbm", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic GARCH(1,1) OHLCV CSV")
    _common(p)

    p = sub.add_parser("train", help="train the baseline or the hybrid model")
    _common(p)
    p.add_argument("--mode", choices=["baseline", "hybrid"], default="hybrid")

    p = sub.add_parser("evaluate", help="test-set metrics for trained runs")
    _common(p)
    p.add_argument("runs", nargs="+", type=Path, help="run or checkpoint directories")

    p = sub.add_parser("report", help="figure CSV and SVG from run histories")
    _common(p)
    p.add_argument("runs", nargs="+", type=Path, help="run directories")
    return parser


def cmd_synth(args) -> int:
    cfg = experiment.load_config(args.config, seed=args.seed)
    out = args.out or Path(cfg.out)
    path = experiment.synth(cfg, out)
    print(path)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = experiment.load_config(args.config, seed=args.seed, out=None if args.out is None else str(args.out))
    run = experiment.train(cfg, args.mode)
    last = run.result.history[-1] if run.result.history else None
    if last is not None:
        print(f"{args.mode}: {len(run.result.history)} epochs, final val RMSE {last.val_rmse:.6g}")
    print(run.out_dir)
    return EXIT_OK


def _run_dir_config(run_dir: Path, override: Path | None, seed: int | None) -> experiment.RunConfig:
    if override is not None:
        return experiment.load_config(override, seed=seed)
    cfg_dir = run_dir if (run_dir / "config.json").exists() else run_dir.parent
    cfg, _ = experiment.run_config_of(cfg_dir)
    if seed is not None:
        cfg.seed = seed
    return cfg


def cmd_evaluate(args) -> int:
    records = {}
    labels = experiment._unique_labels(args.runs)
    dataset_name = ""
    for label, run_dir in zip(labels, args.runs):
        if not run_dir.is_dir():
            raise FileNotFoundError(f"checkpoint directory not found: {run_dir}")
        cfg = _run_dir_config(run_dir, args.config, args.seed)
        dataset_name = experiment.dataset_label(cfg)
        records[label] = experiment.evaluate(cfg, run_dir)
    out = args.out or args.runs[0]
    text, _ = experiment.write_report(records, out, dataset_name)
    print(text, end="")
    return EXIT_OK


def cmd_report(args) -> int:
    out = args.out or Path("figures")
    for path in experiment.report(args.runs, out):
        print(path)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "evaluate": cmd_evaluate, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, InputError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
