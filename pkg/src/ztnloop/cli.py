"""Command-line interface.

Subcommands mirror the experiment stages: simulate (dataset generation),
train (two-stage predictor), train-agent, run-loop, report. Exit codes:
0 success, 2 invalid config, 3 data/schema error, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checkpoint import load_hybrid, load_qtable
from .config import load_config
from .core import build_default_action_space
from .errors import DataError, ZtnLoopError
from .loop import run_closed_loop, write_loop_csv
from .pipeline import (
    HybridPredictor,
    build_achieved_table,
    generate_dataset,
    train_agent_pipeline,
    train_hybrid,
)
from .report import render_report


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="INI config file")
    parser.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    parser.add_argument(
        "--out", type=Path, default=Path("out"), help="artifact directory (default: ./out)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ztnloop",
        description=(
            "Desk-scale closed-loop congestion control: simulate a cell, train the "
            "hybrid bandwidth forecaster, train the shaping agent, run the loop, report."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate the train/test bandwidth series")
    _add_common(p)

    p = sub.add_parser("train", help="train the two-stage bandwidth predictor")
    _add_common(p)
    p.add_argument("--train-csv", type=Path, default=None, help="default: <out>/train.csv")
    p.add_argument("--test-csv", type=Path, default=None, help="default: <out>/test.csv")

    p = sub.add_parser("train-agent", help="train the Q-learning shaping agent")
    _add_common(p)
    p.add_argument("--test-csv", type=Path, default=None, help="default: <out>/test.csv")

    p = sub.add_parser("run-loop", help="run the closed control loop on a live simulator")
    _add_common(p)
    p.add_argument("--timestamps", type=int, default=None, help="loop length (default from config)")
    p.add_argument(
        "--reactive",
        action="store_true",
        help="apply the actual-state action instead of the predicted-state action",
    )
    p.add_argument("--checkpoint", type=Path, default=None, help="default: <out>/checkpoint.json")
    p.add_argument("--qtable", type=Path, default=None, help="default: <out>/qtable.json")

    p = sub.add_parser("report", help="render figures and summary from the artifact directory")
    _add_common(p)
    p.add_argument(
        "--report-dir", type=Path, default=None, help="output directory (default: <out>/report)"
    )
    return parser


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise DataError(f"{path} not found; run `ztnloop {hint}` first or pass the path explicitly")
    return path


def _cmd_simulate(args) -> None:
    cfg = load_config(args.config, args.seed)
    train_path, test_path = generate_dataset(cfg, args.out)
    print(f"wrote {train_path} ({cfg.train_samples} samples)")
    print(f"wrote {test_path} ({cfg.test_samples} samples)")


def _cmd_train(args) -> None:
    cfg = load_config(args.config, args.seed)
    train_csv = _require(args.train_csv or args.out / "train.csv", "simulate")
    test_csv = _require(args.test_csv or args.out / "test.csv", "simulate")
    metrics = train_hybrid(cfg, train_csv, test_csv, args.out)
    print(f"wrote {args.out / 'checkpoint.json'}")
    print(f"first-stage test MSE: {metrics['mse_bilstm']:.4f}")
    print(f"hybrid test MSE:      {metrics['mse_hybrid']:.4f}")


def _cmd_train_agent(args) -> None:
    cfg = load_config(args.config, args.seed)
    test_csv = _require(args.test_csv or args.out / "test.csv", "simulate")
    info = train_agent_pipeline(cfg, test_csv, args.out)
    print(f"wrote {args.out / 'qtable.json'} and {args.out / 'trace.csv'}")
    print(f"episodes: {info['episodes']}, final trace MAE: {info['final_mae']:.4f} Mbps")


def _cmd_run_loop(args) -> None:
    cfg = load_config(args.config, args.seed)
    checkpoint = _require(args.checkpoint or args.out / "checkpoint.json", "train")
    qtable_path = _require(args.qtable or args.out / "qtable.json", "train-agent")
    model, scaler, ensemble = load_hybrid(checkpoint)
    q, _labels = load_qtable(qtable_path)
    action_space = build_default_action_space()
    table = build_achieved_table(cfg, action_space)
    records, summary = run_closed_loop(
        cfg,
        HybridPredictor(model, scaler, ensemble),
        q,
        action_space,
        table,
        timestamps=args.timestamps,
        reactive=args.reactive,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    write_loop_csv(records, args.out / "loop.csv")
    with open(args.out / "loop_summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "timestamps": summary.timestamps,
                "accuracy": summary.accuracy,
                "mae_mbps": summary.mae_mbps,
                "degenerate": summary.degenerate,
                "mode": "reactive" if args.reactive else "proactive",
            },
            fh,
            indent=1,
        )
        fh.write("\n")
    print(f"wrote {args.out / 'loop.csv'}")
    print(summary.describe())


def _cmd_report(args) -> None:
    out_dir = args.report_dir or args.out / "report"
    written = render_report(args.out, out_dir)
    for path in written:
        print(f"wrote {path}")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "train-agent": _cmd_train_agent,
    "run-loop": _cmd_run_loop,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ZtnLoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
