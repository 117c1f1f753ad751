"""Flat experiment configuration and the seeds x methods runner."""
from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import (PdaTaskSpec, SampleSet, generate_pda_task, load_feature_csv, read_label_csv,
                   write_feature_csv)
from .errors import ConfigError
from .evaluation import ExperimentReport, emit_table, evaluate
from .model import predict, save_checkpoint
from .trainer import METHODS, TrainConfig, config_for_method, model_for_config, train
from .weighting import ClassWeights, pseudo_label

TRAIN_KEYS = {f.name: f for f in fields(TrainConfig) if f.name != "seed"}
TASK_KEYS = {f.name: f for f in fields(PdaTaskSpec) if f.name != "seed"}


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    task: PdaTaskSpec = field(default_factory=PdaTaskSpec)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    methods: tuple[str, ...] = ("ccpda",)
    task_name: str = "synthetic"
    source_csv: str | None = None
    target_csv: str | None = None
    target_labels_csv: str | None = None
    export_embeddings: bool = True
    save_checkpoints: bool = True


_EXPERIMENT_KEYS = {f.name: f for f in fields(ExperimentConfig) if f.name not in ("train", "task")}
ALL_KEYS = {**TRAIN_KEYS, **TASK_KEYS, **_EXPERIMENT_KEYS}


def _coerce(name: str, value: Any) -> Any:
    typ = str(ALL_KEYS[name].type)
    if "tuple" in typ:
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        elif not isinstance(value, (list, tuple)):
            value = [value]
        elem = float if "float" in typ else (int if "int" in typ else str)
        return tuple(elem(v) if elem is not str else str(v).strip() for v in value)
    if typ.startswith("bool"):
        if isinstance(value, str):
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"{name}: expected a boolean, got {value!r}")
            return value.lower() in ("true", "1", "yes")
        return bool(value)
    if value is None or (isinstance(value, str) and value == "" and "None" in typ):
        return None
    if typ.startswith("int"):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return int(value)
    if typ.startswith("float"):
        return float(value)
    return str(value)


def parse_config(values: Mapping[str, Any]) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from flat keys; unknown keys are rejected."""
    unknown = sorted(set(values) - set(ALL_KEYS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    train_kw, task_kw, exp_kw = {}, {}, {}
    for key, value in values.items():
        try:
            coerced = _coerce(key, value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot interpret {value!r} ({exc})") from None
        (train_kw if key in TRAIN_KEYS else task_kw if key in TASK_KEYS else exp_kw)[key] = coerced
    exp = ExperimentConfig(TrainConfig(**train_kw), PdaTaskSpec(**task_kw), **exp_kw)
    for m in exp.methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
    if not exp.seeds:
        raise ConfigError("seeds must name at least one seed")
    if exp.source_csv is not None and exp.target_csv is None:
        raise ConfigError("source_csv given without target_csv")
    return exp


def read_config_file(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        values = tomllib.load(fh)
    nested = [k for k, v in values.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: configuration must be flat, found tables {nested}")
    return values


def load_config(path: str | Path, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    values = read_config_file(path)
    values.update(overrides or {})
    return parse_config(values)


def load_task(cfg: ExperimentConfig, seed: int) -> tuple[SampleSet, SampleSet, np.ndarray | None, PdaTaskSpec | None]:
    """(source, target, target ground truth or None, synthetic spec or None) for one seed."""
    if cfg.source_csv is not None:
        source = load_feature_csv(cfg.source_csv, has_labels=True)
        target = load_feature_csv(cfg.target_csv, has_labels=False)
        truth = read_label_csv(cfg.target_labels_csv) if cfg.target_labels_csv else None
        return source, target, truth, None
    spec = replace(cfg.task, seed=seed)
    source, target, truth = generate_pda_task(spec)
    return source, target, truth, spec


def _write_jsonl(path: Path, records: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _write_embeddings(path: Path, model, source: SampleSet, target: SampleSet) -> None:
    fs, _ = predict(model, source.features)
    ft, pt = predict(model, target.features)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("domain,label," + ",".join(f"f{i}" for i in range(fs.shape[1])) + "\n")
        for row, y in zip(fs, source.labels):
            fh.write(f"source,{int(y)}," + ",".join(format(v, ".17g") for v in row) + "\n")
        for row, y in zip(ft, pseudo_label(pt)):
            fh.write(f"target,{int(y)}," + ",".join(format(v, ".17g") for v in row) + "\n")


def run_single(cfg: ExperimentConfig, method: str, seed: int, out_dir: str | Path | None = None) -> ExperimentReport:
    """Train one method on one seed and emit its files under ``out_dir/<method>/seed<seed>``."""
    start = time.perf_counter()
    source, target, truth, spec = load_task(cfg, seed)
    tcfg = replace(config_for_method(cfg.train, method), seed=seed)
    model = model_for_config(source.dim, int(source.labels.max()) + 1 if spec is None else spec.num_classes, tcfg)
    model, result = train(model, source, target, tcfg, truth)
    gamma = ClassWeights(result.final_gamma)
    shared = spec.shared_classes if spec is not None else (np.unique(truth).tolist() if truth is not None else None)
    g_shared, g_outlier = gamma.split_means(shared) if shared is not None else (None, None)
    scores = (evaluate(model, target.features, truth) if truth is not None
              else {"accuracy": float("nan"), "per_class_accuracy": {}, "class_counts": {}, "predictions": []})
    config_echo = {**tcfg.to_dict(), **({k: getattr(spec, k) for k in TASK_KEYS} if spec else {}),
                   "source_csv": cfg.source_csv, "target_csv": cfg.target_csv}
    config_echo = json.loads(json.dumps(config_echo))
    report = ExperimentReport(method, seed, scores["accuracy"], scores["per_class_accuracy"],
                              scores["class_counts"], gamma.gamma.tolist(), g_shared, g_outlier,
                              config_echo, cfg.task_name)

    if out_dir is not None:
        run_dir = Path(out_dir) / method / f"seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        _write_jsonl(run_dir / "metrics.jsonl", result.history)
        _write_jsonl(run_dir / "epochs.jsonl", result.epochs)
        (run_dir / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
        if truth is not None:
            with open(run_dir / "predictions.csv", "w", encoding="utf-8") as fh:
                fh.write("index,label,prediction\n")
                for i, (y, p) in enumerate(zip(truth, scores["predictions"])):
                    fh.write(f"{i},{int(y)},{int(p)}\n")
        if cfg.export_embeddings:
            _write_embeddings(run_dir / "embeddings.csv", model, source, target)
        if cfg.save_checkpoints:
            save_checkpoint(model, run_dir / "checkpoint.npz")
    report.wall_clock = time.perf_counter() - start
    return report


def run_experiment(config: str | Path | ExperimentConfig, out_dir: str | Path | None = None,
                   overrides: Mapping[str, Any] | None = None) -> list[ExperimentReport]:
    """Every configured method on every seed; writes the comparison table when ``out_dir`` is set."""
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config, overrides)
    if cfg.source_csv is not None:
        # fail before any training if the files are unreadable
        load_task(cfg, cfg.seeds[0])
    reports = [run_single(cfg, method, seed, out_dir) for method in cfg.methods for seed in cfg.seeds]
    if out_dir is not None:
        out = Path(out_dir)
        emit_table(reports, out / "table", method_order=list(METHODS))
        (out / "reports.json").write_text(
            json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True) + "\n")
        timing = [{"method": r.method, "seed": r.seed, "wall_clock": r.wall_clock} for r in reports]
        (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    return reports


def write_task(spec: PdaTaskSpec, out_dir: str | Path) -> dict[str, Path]:
    """Write a synthetic task as source.csv (labeled), target.csv and target_labels.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    source, target, truth = generate_pda_task(spec)
    paths = {"source": out / "source.csv", "target": out / "target.csv", "target_labels": out / "target_labels.csv"}
    write_feature_csv(paths["source"], source.features, source.labels)
    write_feature_csv(paths["target"], target.features)
    paths["target_labels"].write_text("".join(f"{int(v)}\n" for v in truth), encoding="utf-8")
    return paths
