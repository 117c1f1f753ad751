"""Command-line entry point: ``ccpda {generate,train,sweep,eval}``.

Every flat configuration key is also a flag (``--lam 0.1``,
``--shared-classes 0,1,2``); flags override the config file.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .data import load_feature_csv, read_label_csv
from .errors import ConfigError, ContractError, ParseError
from .evaluation import emit_table, evaluate
from .experiment import ALL_KEYS, parse_config, read_config_file, run_experiment, run_single, write_task
from .model import load_checkpoint
from .trainer import METHODS, TrainingError


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat TOML configuration file")
    group = parser.add_argument_group("configuration keys (override the file)")
    for key in ALL_KEYS:
        group.add_argument(f"--{key.replace('_', '-')}", dest=f"cfg_{key}", metavar="VALUE", default=None)


def _experiment_config(args):
    values = read_config_file(args.config) if args.config else {}
    for key in ALL_KEYS:
        value = getattr(args, f"cfg_{key}")
        if value is not None:
            values[key] = value
    return parse_config(values)


def _cmd_generate(args) -> int:
    cfg = _experiment_config(args)
    spec = replace(cfg.task, seed=args.seed if args.seed is not None else cfg.seeds[0])
    paths = write_task(spec, args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _cmd_train(args) -> int:
    cfg = _experiment_config(args)
    method = args.method or cfg.methods[0]
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    report = run_single(cfg, method, seed, args.out)
    print(json.dumps({"method": method, "seed": seed, "accuracy": report.accuracy,
                      "final_gamma": report.final_gamma}, indent=2))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    reports = run_experiment(cfg, args.out)
    print(emit_table(reports, method_order=list(METHODS)), end="")
    return 0


def _cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    if args.labels is not None:
        samples = load_feature_csv(args.features, has_labels=False)
        labels = read_label_csv(args.labels)
    else:
        samples = load_feature_csv(args.features, has_labels=True)
        labels = samples.labels
    scores = evaluate(model, samples.features, labels)
    if args.predictions is not None:
        with open(args.predictions, "w", encoding="utf-8") as fh:
            fh.write("index,label,prediction\n")
            for i, (y, p) in enumerate(zip(labels, scores["predictions"])):
                fh.write(f"{i},{int(y)},{int(p)}\n")
    scores.pop("predictions")
    print(json.dumps(scores, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccpda", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic partial-adaptation task to CSV")
    _add_config_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train one method on one seed")
    _add_config_flags(p)
    p.add_argument("--method", choices=sorted(METHODS))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sweep", help="train every configured method on every seed")
    _add_config_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("eval", help="score a checkpoint on a feature CSV")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True,
                   help="CSV whose last column is the label, unless --labels is given")
    p.add_argument("--labels", type=Path, help="separate one-label-per-line file")
    p.add_argument("--predictions", type=Path, help="write per-sample predictions here")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ContractError, ParseError, TrainingError, OSError, ValueError) as exc:
        print(f"ccpda {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
